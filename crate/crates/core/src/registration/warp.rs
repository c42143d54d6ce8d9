use crate::image::{GrayImage, Mask};
use crate::imaging::NormalizedImage;

use super::transform::SimilarityTransform;

/// Result of [`warp`]: the moved image plus which output pixels had a source.
#[derive(Debug, Clone)]
pub struct Warped {
    pub image: NormalizedImage,
    pub valid: Mask,
}

/// Moves the content of `img` by `t` (a feature at `p` ends up at `t(p)`),
/// keeping the frame size. Pixels with no source are 0 and marked invalid.
pub fn warp(img: &NormalizedImage, t: &SimilarityTransform) -> Warped {
    let (image, valid) = warp_into(&img.image, t, img.width(), img.height());
    let foreground = img
        .foreground
        .as_ref()
        .map(|m| warp_mask_into(m, t, img.width(), img.height()));
    Warped {
        image: NormalizedImage {
            image,
            foreground,
            ..img.clone()
        },
        valid,
    }
}

/// Bilinear warp of `img` by `t` into a `width x height` frame.
pub fn warp_into(
    img: &GrayImage,
    t: &SimilarityTransform,
    width: usize,
    height: usize,
) -> (GrayImage, Mask) {
    let inv = t.inverse();
    let mut valid = Mask::new(width, height, false);
    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (sx, sy) = inv.apply((x as f64, y as f64));
            match img.sample_bilinear(sx, sy) {
                Some(v) => {
                    valid.set(x, y, true);
                    pixels.push(v);
                }
                None => pixels.push(0.0),
            }
        }
    }
    let image = GrayImage::new(width, height, pixels).expect("warp output is in range");
    (image, valid)
}

/// Nearest-neighbour warp of a mask; pixels with no source are unset.
pub fn warp_mask_into(mask: &Mask, t: &SimilarityTransform, width: usize, height: usize) -> Mask {
    let inv = t.inverse();
    let mut out = Mask::new(width, height, false);
    for y in 0..height {
        for x in 0..width {
            let (sx, sy) = inv.apply((x as f64, y as f64));
            let (rx, ry) = (sx.round(), sy.round());
            if rx >= 0.0 && ry >= 0.0 && (rx as usize) < mask.width() && (ry as usize) < mask.height()
            {
                out.set(x, y, mask.get(rx as usize, ry as usize));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn identity_is_pixel_exact() {
        let img = NormalizedImage::from_gray("x", synth::Die::random(3).base().clone());
        let w = warp(&img, &SimilarityTransform::identity());
        assert_eq!(w.image.image, img.image);
        assert_eq!(w.valid.count(), img.width() * img.height());
    }

    #[test]
    fn translation_round_trip() {
        let img = NormalizedImage::from_gray("x", synth::Die::random(4).base().clone());
        let there = warp(&img, &SimilarityTransform::translation(5.0, 0.0));
        let back = warp(&there.image, &SimilarityTransform::translation(-5.0, 0.0));
        let (w, h) = (img.width(), img.height());
        let mut err = 0.0;
        let mut n = 0;
        for y in 0..h {
            for x in 5..w - 5 {
                err += (back.image.image.get(x, y) - img.image.get(x, y)).abs() as f64;
                n += 1;
            }
        }
        assert!(err / (n as f64) < 1e-3);
        assert!(!there.valid.get(0, 0) && there.valid.get(5, 0));
    }

    #[test]
    fn quarter_turn_permutes_pixels() {
        // 0 1 2        6 3 0
        // 3 4 5   ->   7 4 1
        // 6 7 8        8 5 2
        let img = GrayImage::from_fn(3, 3, |x, y| (x + 3 * y) as f32 / 8.0);
        let t = SimilarityTransform::about((1.0, 1.0), std::f64::consts::FRAC_PI_2, 1.0, (0.0, 0.0));
        let (out, valid) = warp_into(&img, &t, 3, 3);
        let expected = [6, 3, 0, 7, 4, 1, 8, 5, 2];
        for (i, e) in expected.iter().enumerate() {
            assert!((out.pixels()[i] - *e as f32 / 8.0).abs() < 1e-6, "pixel {i}");
        }
        assert_eq!(valid.count(), 9);
    }
}
