//! Decoding and normalization of coin photographs.
//!
//! All comparisons happen at a working resolution where the coin itself (not
//! the photograph) spans about 400 pixels. Larger coins are reduced with an
//! area-average filter; smaller coins are never enlarged.

mod segment;

use std::io::Cursor;

use image::{DynamicImage, ImageDecoder, ImageReader};
use thiserror::Error;

use crate::image::{GrayImage, Mask};

pub use segment::foreground_mask;

/// Coin extent targeted by [`normalize`], in pixels.
pub const TARGET_EXTENT: usize = 400;
/// Relative band around [`TARGET_EXTENT`] accepted as "about 400 pixels".
pub const EXTENT_TOLERANCE: f64 = 0.10;
/// Extents below this still work but are reported as a quality problem.
pub const MIN_RELIABLE_EXTENT: usize = 32;
/// Segmentation runs on a copy reduced to at most this many pixels per side.
const SEGMENTATION_MAX_SIDE: usize = 1024;

/// BT.709 luma weights.
const LUMA: [f64; 3] = [0.2126, 0.7152, 0.0722];

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("unsupported or corrupt image: {0}")]
    Image(#[from] image::ImageError),
    #[error("i/o error while decoding: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Error, PartialEq, Eq)]
pub enum SegmentationFailure {
    #[error("image has no contrast to separate a coin from its background")]
    Uniform,
    #[error("no foreground region found")]
    NoForeground,
}

/// Decodes PNG/JPEG/TIFF/BMP bytes into a BT.709 luma image, applying the
/// EXIF orientation when the container carries one.
pub fn load_image(bytes: &[u8]) -> Result<GrayImage, DecodeError> {
    let mut decoder = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()?
        .into_decoder()?;
    let orientation = decoder.orientation()?;
    let mut dynamic = DynamicImage::from_decoder(decoder)?;
    dynamic.apply_orientation(orientation);
    Ok(to_luma(&dynamic))
}

fn to_luma(dynamic: &DynamicImage) -> GrayImage {
    let rgb = dynamic.to_rgb32f();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let norm = LUMA.iter().sum::<f64>();
    let pixels = rgb
        .pixels()
        .map(|p| {
            let y = LUMA[0] * p[0] as f64 + LUMA[1] * p[1] as f64 + LUMA[2] * p[2] as f64;
            ((y / norm) as f32).clamp(0.0, 1.0)
        })
        .collect();
    GrayImage::new(w, h, pixels).expect("decoded image is non-empty and in range")
}

/// Pixel extent of the coin: the larger side of its bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EffectiveSize {
    pub extent: usize,
    /// `true` when segmentation failed and the whole frame was used instead.
    pub fallback: bool,
}

impl EffectiveSize {
    /// Whole-image extent, used when no coin can be segmented.
    pub fn full_image(img: &GrayImage) -> Self {
        Self {
            extent: img.max_dimension(),
            fallback: true,
        }
    }
}

/// Measures the coin's extent. Very large photographs are segmented on an
/// area-reduced copy and the result is scaled back.
pub fn estimate_effective_size(img: &GrayImage) -> Result<EffectiveSize, SegmentationFailure> {
    let max_side = img.max_dimension();
    let (work, factor) = if max_side > SEGMENTATION_MAX_SIDE {
        let f = SEGMENTATION_MAX_SIDE as f64 / max_side as f64;
        let w = ((img.width() as f64 * f).round() as usize).max(1);
        let h = ((img.height() as f64 * f).round() as usize).max(1);
        (std::borrow::Cow::Owned(img.resample_area(w, h)), f)
    } else {
        (std::borrow::Cow::Borrowed(img), 1.0)
    };
    let mask = foreground_mask(&work)?;
    let (x0, y0, x1, y1) = mask.bounding_box().ok_or(SegmentationFailure::NoForeground)?;
    let extent = (x1 - x0 + 1).max(y1 - y0 + 1) as f64 / factor;
    Ok(EffectiveSize {
        extent: (extent.round() as usize).clamp(1, max_side),
        fallback: false,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QualityWarning {
    /// No coin could be separated from the background; the full frame was used.
    SegmentationFallback,
    /// The coin spans fewer than [`MIN_RELIABLE_EXTENT`] pixels.
    SmallCoin { extent: usize },
}

/// A coin image at working resolution, ready for comparison.
#[derive(Debug, Clone)]
pub struct NormalizedImage {
    pub image: GrayImage,
    pub scale_applied: f64,
    pub source_name: String,
    /// Coin extent after normalization.
    pub extent: usize,
    /// Coin region at working resolution; `None` if segmentation failed.
    pub foreground: Option<Mask>,
    pub warnings: Vec<QualityWarning>,
}

impl NormalizedImage {
    /// Wraps an image that is already at working resolution.
    pub fn from_gray(name: impl Into<String>, image: GrayImage) -> Self {
        let eff = estimate_effective_size(&image).unwrap_or_else(|_| EffectiveSize::full_image(&image));
        normalize(&image, eff).with_name(name)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.source_name = name.into();
        self
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }
}

/// Reduces `img` so the coin spans about [`TARGET_EXTENT`] pixels.
///
/// Coins already inside the tolerance band (or smaller) are returned
/// unchanged, which makes the operation idempotent: a normalized image
/// re-measures inside the band and is left alone.
pub fn normalize(img: &GrayImage, eff: EffectiveSize) -> NormalizedImage {
    let upper = (TARGET_EXTENT as f64 * (1.0 + EXTENT_TOLERANCE)).floor() as usize;
    let (image, scale, extent) = if eff.extent > upper {
        let scale = TARGET_EXTENT as f64 / eff.extent as f64;
        let w = ((img.width() as f64 * scale).round() as usize).max(1);
        let h = ((img.height() as f64 * scale).round() as usize).max(1);
        (img.resample_area(w, h), scale, TARGET_EXTENT)
    } else {
        (img.clone(), 1.0, eff.extent)
    };

    let mut warnings = Vec::new();
    if eff.fallback {
        warnings.push(QualityWarning::SegmentationFallback);
    }
    if extent < MIN_RELIABLE_EXTENT {
        warnings.push(QualityWarning::SmallCoin { extent });
    }
    let foreground = if eff.fallback {
        None
    } else {
        foreground_mask(&image).ok()
    };
    NormalizedImage {
        image,
        scale_applied: scale,
        source_name: String::new(),
        extent,
        foreground,
        warnings,
    }
}

/// Decode, measure and normalize one file.
pub fn prepare(name: &str, bytes: &[u8]) -> Result<NormalizedImage, DecodeError> {
    let img = load_image(bytes)?;
    let eff = estimate_effective_size(&img).unwrap_or_else(|_| EffectiveSize::full_image(&img));
    Ok(normalize(&img, eff).with_name(name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn encode_png(img: DynamicImage) -> Vec<u8> {
        let mut out = Vec::new();
        img.write_to(&mut Cursor::new(&mut out), image::ImageFormat::Png)
            .unwrap();
        out
    }

    #[test]
    fn white_and_black_png() {
        let white = image::RgbImage::from_pixel(2, 2, image::Rgb([255, 255, 255]));
        let g = load_image(&encode_png(DynamicImage::ImageRgb8(white))).unwrap();
        assert!(g.pixels().iter().all(|&v| v == 1.0));
        let black = image::RgbImage::from_pixel(2, 2, image::Rgb([0, 0, 0]));
        let g = load_image(&encode_png(DynamicImage::ImageRgb8(black))).unwrap();
        assert!(g.pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pure_red_maps_to_bt709_weight() {
        let red = image::RgbImage::from_pixel(1, 1, image::Rgb([255, 0, 0]));
        let g = load_image(&encode_png(DynamicImage::ImageRgb8(red))).unwrap();
        assert!((g.get(0, 0) as f64 - 0.2126).abs() < 1e-6);
    }

    #[test]
    fn garbage_bytes_fail_to_decode() {
        assert!(load_image(b"definitely not an image").is_err());
        assert!(load_image(&[]).is_err());
    }

    #[test]
    fn disc_extent_is_measured() {
        for d in [100usize, 200, 390] {
            let img = synth::disc(400.max(d + 40), d as f64, 1.0, 0.0);
            let eff = estimate_effective_size(&img).unwrap();
            assert!(
                (eff.extent as f64 - d as f64).abs() <= 0.05 * d as f64,
                "diameter {d}: extent {}",
                eff.extent
            );
        }
    }

    #[test]
    fn coin_in_wide_photograph() {
        // 787px frame holding a 390px coin: the coin, not the frame, is measured.
        let img = synth::disc(787, 390.0, 0.85, 0.15);
        let eff = estimate_effective_size(&img).unwrap();
        assert!((eff.extent as f64 - 390.0).abs() <= 0.05 * 390.0);
        let n = normalize(&img, eff);
        assert_eq!(n.scale_applied, 1.0);
        assert_eq!(n.image, img);
    }

    #[test]
    fn uniform_image_has_no_coin() {
        let img = GrayImage::filled(50, 40, 0.5);
        assert_eq!(
            estimate_effective_size(&img),
            Err(SegmentationFailure::Uniform)
        );
        assert_eq!(EffectiveSize::full_image(&img).extent, 50);
    }

    #[test]
    fn large_coin_is_halved() {
        let img = synth::disc(1000, 800.0, 1.0, 0.0);
        let eff = EffectiveSize {
            extent: 800,
            fallback: false,
        };
        let n = normalize(&img, eff);
        assert_eq!(n.scale_applied, 0.5);
        assert_eq!((n.width(), n.height()), (500, 500));
        let measured = estimate_effective_size(&n.image).unwrap().extent;
        assert!((360..=440).contains(&measured), "measured {measured}");
    }

    #[test]
    fn boundary_extent_is_left_alone() {
        let img = synth::disc(420, 400.0, 1.0, 0.0);
        let n = normalize(
            &img,
            EffectiveSize {
                extent: 400,
                fallback: false,
            },
        );
        assert_eq!(n.scale_applied, 1.0);
        assert_eq!(n.image, img);
    }

    #[test]
    fn normalize_is_idempotent() {
        for (size, d) in [(1200usize, 1000.0), (900, 700.0), (600, 455.0), (500, 300.0)] {
            let img = synth::disc(size, d, 0.9, 0.1);
            let once = normalize(&img, estimate_effective_size(&img).unwrap());
            let twice = normalize(&once.image, estimate_effective_size(&once.image).unwrap());
            assert_eq!(once.image, twice.image, "size {size}");
            assert!(once.scale_applied <= 1.0);
            assert_eq!(twice.scale_applied, 1.0);
        }
    }

    #[test]
    fn tiny_coin_is_flagged() {
        let img = synth::disc(64, 20.0, 1.0, 0.0);
        let n = normalize(&img, estimate_effective_size(&img).unwrap());
        assert!(n
            .warnings
            .iter()
            .any(|w| matches!(w, QualityWarning::SmallCoin { .. })));
    }
}
