//! Grayscale rasters and boolean masks.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("expected {expected} pixels for the given dimensions, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("pixel {index} has value {value}, outside [0, 1]")]
    OutOfRange { index: usize, value: f32 },
}

/// Row-major luminance raster with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        if pixels.len() != width * height {
            return Err(ImageError::LengthMismatch {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        if let Some((index, &value)) = pixels
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(ImageError::OutOfRange { index, value });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image from a per-pixel function; values are clamped to `[0, 1]`
    /// and NaN maps to 0.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be non-zero");
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(clamp_unit(f(x, y)));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    pub fn max_dimension(&self) -> usize {
        self.width.max(self.height)
    }

    /// Bilinear sample at subpixel coordinates (pixel centers on integers).
    /// Returns `None` outside `[0, w-1] x [0, h-1]`, with a tiny tolerance so
    /// that exact rotations landing on a border are not rejected.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f32> {
        const EPS: f64 = 1e-6;
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        if !(x >= -EPS && y >= -EPS && x <= max_x + EPS && y <= max_y + EPS) {
            return None;
        }
        let x = x.clamp(0.0, max_x);
        let y = y.clamp(0.0, max_y);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) as f64 * (1.0 - fx) + self.get(x1, y0) as f64 * fx;
        let bottom = self.get(x0, y1) as f64 * (1.0 - fx) + self.get(x1, y1) as f64 * fx;
        Some(clamp_unit((top * (1.0 - fy) + bottom * fy) as f32))
    }

    /// Separable Gaussian blur with replicated borders.
    pub fn gaussian_blur(&self, sigma: f64) -> GrayImage {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil() as usize;
        let kernel = gaussian_kernel(sigma, radius);
        let (w, h) = (self.width, self.height);
        let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
        let mut tmp = vec![0f64; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, weight) in kernel.iter().enumerate() {
                    let sx = clamp(x as isize + k as isize - radius as isize, w);
                    acc += weight * self.get(sx, y) as f64;
                }
                tmp[y * w + x] = acc;
            }
        }
        let mut out = vec![0f32; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, weight) in kernel.iter().enumerate() {
                    let sy = clamp(y as isize + k as isize - radius as isize, h);
                    acc += weight * tmp[sy * w + x];
                }
                out[y * w + x] = clamp_unit(acc as f32);
            }
        }
        GrayImage {
            width: w,
            height: h,
            pixels: out,
        }
    }

    /// Area-average (box filter) resampling to the requested size. Each output
    /// pixel is the coverage-weighted mean of the source pixels under it.
    pub fn resample_area(&self, out_width: usize, out_height: usize) -> GrayImage {
        assert!(out_width > 0 && out_height > 0);
        if out_width == self.width && out_height == self.height {
            return self.clone();
        }
        let cols = area_weights(self.width, out_width);
        let rows = area_weights(self.height, out_height);
        let mut tmp = vec![0f64; out_width * self.height];
        for y in 0..self.height {
            let row = &self.pixels[y * self.width..(y + 1) * self.width];
            for (ox, taps) in cols.iter().enumerate() {
                tmp[y * out_width + ox] = taps.iter().map(|&(i, w)| w * row[i] as f64).sum();
            }
        }
        let mut out = vec![0f32; out_width * out_height];
        for (oy, taps) in rows.iter().enumerate() {
            for ox in 0..out_width {
                let v: f64 = taps.iter().map(|&(i, w)| w * tmp[i * out_width + ox]).sum();
                out[oy * out_width + ox] = clamp_unit(v as f32);
            }
        }
        GrayImage {
            width: out_width,
            height: out_height,
            pixels: out,
        }
    }
}

/// Source taps and normalized weights for a 1-D area-average resample.
fn area_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let start = o as f64 * ratio;
            let end = ((o + 1) as f64 * ratio).min(src as f64);
            let mut taps = Vec::new();
            let mut i = start.floor() as usize;
            while (i as f64) < end && i < src {
                let lo = start.max(i as f64);
                let hi = end.min((i + 1) as f64);
                if hi > lo {
                    taps.push((i, hi - lo));
                }
                i += 1;
            }
            let total: f64 = taps.iter().map(|t| t.1).sum();
            for t in &mut taps {
                t.1 /= total;
            }
            taps
        })
        .collect()
}

/// Normalized 1-D Gaussian kernel of length `2 * radius + 1`.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let mut kernel: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= sum);
    kernel
}

#[inline]
pub(crate) fn clamp_unit(v: f32) -> f32 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Row-major boolean mask with the same geometry as an image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height, "mask length mismatch");
        Self {
            width,
            height,
            bits,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn and(&self, other: &Mask) -> Mask {
        assert_eq!((self.width, self.height), (other.width, other.height));
        Mask {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| *a && *b)
                .collect(),
        }
    }

    /// Bounding box `(min_x, min_y, max_x, max_y)` of the set pixels.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bbox: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    bbox = Some(match bbox {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                    });
                }
            }
        }
        bbox
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_pixels() {
        assert!(matches!(
            GrayImage::new(1, 1, vec![1.5]),
            Err(ImageError::OutOfRange { index: 0, .. })
        ));
        assert!(matches!(
            GrayImage::new(0, 3, vec![]),
            Err(ImageError::EmptyDimensions { .. })
        ));
        assert!(matches!(
            GrayImage::new(2, 2, vec![0.0; 3]),
            Err(ImageError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn area_resample_halves_exactly() {
        let img = GrayImage::from_fn(4, 2, |x, _| if x % 2 == 0 { 0.0 } else { 1.0 });
        let out = img.resample_area(2, 1);
        assert_eq!(out.pixels(), &[0.5, 0.5]);
    }

    #[test]
    fn area_weights_sum_to_one() {
        for (src, dst) in [(10, 3), (787, 400), (401, 400), (5, 5)] {
            for taps in area_weights(src, dst) {
                let s: f64 = taps.iter().map(|t| t.1).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bilinear_hits_pixel_centers() {
        let img = GrayImage::from_fn(3, 3, |x, y| (x + 3 * y) as f32 / 8.0);
        assert_eq!(img.sample_bilinear(2.0, 1.0), Some(img.get(2, 1)));
        assert_eq!(img.sample_bilinear(-1e-9, 0.0), Some(img.get(0, 0)));
        assert_eq!(img.sample_bilinear(2.5, 0.0), None);
        let mid = img.sample_bilinear(0.5, 0.0).unwrap();
        assert!((mid - 0.5 / 8.0).abs() < 1e-6);
    }

    #[test]
    fn blur_preserves_constant_image() {
        let img = GrayImage::filled(9, 7, 0.25);
        assert!(img
            .gaussian_blur(1.5)
            .pixels()
            .iter()
            .all(|v| (v - 0.25).abs() < 1e-6));
    }
}
