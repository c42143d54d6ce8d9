//! Masked structural similarity.
//!
//! Local statistics are Gaussian-weighted over the valid pixels of each window;
//! windows whose valid share falls below `min_valid_fraction` are skipped and
//! the score is the mean SSIM of the remaining windows.

use thiserror::Error;

use crate::image::{gaussian_kernel, GrayImage, Mask};

/// Dynamic range of pixel values.
pub const DYNAMIC_RANGE: f64 = 1.0;
pub const C1: f64 = (0.01 * DYNAMIC_RANGE) * (0.01 * DYNAMIC_RANGE);
pub const C2: f64 = (0.03 * DYNAMIC_RANGE) * (0.03 * DYNAMIC_RANGE);

#[derive(Debug, Clone, Copy, Error, PartialEq, Eq)]
pub enum SsimError {
    #[error("images differ in size: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("no window has enough valid overlap")]
    EmptyOverlap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    /// Square window of side `2 * radius + 1` with Gaussian weights.
    Gaussian { radius: usize, sigma: f64 },
    /// Square window of side `size` with equal weights.
    Uniform { size: usize },
}

impl Window {
    pub fn size(&self) -> usize {
        match *self {
            Window::Gaussian { radius, .. } => 2 * radius + 1,
            Window::Uniform { size } => size,
        }
    }

    /// Separable 1-D weights; the 2-D weight is the outer product.
    pub fn weights(&self) -> Vec<f64> {
        match *self {
            Window::Gaussian { radius, sigma } => gaussian_kernel(sigma, radius),
            Window::Uniform { size } => vec![1.0 / size as f64; size],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window: Window,
    pub min_valid_fraction: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: Window::Gaussian {
                radius: 5,
                sigma: 1.5,
            },
            min_valid_fraction: 0.8,
        }
    }
}

/// Mean SSIM over the masked 11x11 Gaussian windows.
pub fn ssim(a: &GrayImage, b: &GrayImage, mask: &Mask) -> Result<f64, SsimError> {
    ssim_with(a, b, mask, &SsimParams::default())
}

pub fn ssim_with(
    a: &GrayImage,
    b: &GrayImage,
    mask: &Mask,
    params: &SsimParams,
) -> Result<f64, SsimError> {
    let dims_a = (a.width(), a.height());
    let dims_b = (b.width(), b.height());
    if dims_a != dims_b {
        return Err(SsimError::DimensionMismatch(dims_a, dims_b));
    }
    if dims_a != (mask.width(), mask.height()) {
        return Err(SsimError::DimensionMismatch(
            dims_a,
            (mask.width(), mask.height()),
        ));
    }
    let (w, h) = dims_a;
    let n = params.window.size();
    if n == 0 || n > w || n > h {
        return Err(SsimError::EmptyOverlap);
    }
    let kernel = params.window.weights();
    let (ow, oh) = (w - n + 1, h - n + 1);

    let len = w * h;
    let mut chans = [
        vec![0f64; len],
        vec![0f64; len],
        vec![0f64; len],
        vec![0f64; len],
        vec![0f64; len],
        vec![0f64; len],
    ];
    for i in 0..len {
        if mask.bits()[i] {
            let x = a.pixels()[i] as f64;
            let y = b.pixels()[i] as f64;
            chans[0][i] = 1.0;
            chans[1][i] = x;
            chans[2][i] = y;
            chans[3][i] = x * x;
            chans[4][i] = y * y;
            chans[5][i] = x * y;
        }
    }
    let [m, sx, sy, sxx, syy, sxy] = chans.map(|c| correlate_valid(&c, w, h, &kernel));
    let counts = window_counts(mask, n);
    let min_valid = params.min_valid_fraction * (n * n) as f64;

    let mut total = 0.0;
    let mut windows = 0usize;
    for i in 0..ow * oh {
        if (counts[i] as f64) < min_valid || counts[i] == 0 {
            continue;
        }
        let weight = m[i];
        let mx = sx[i] / weight;
        let my = sy[i] / weight;
        let vx = sxx[i] / weight - mx * mx;
        let vy = syy[i] / weight - my * my;
        let cxy = sxy[i] / weight - mx * my;
        total += ssim_formula(mx, my, vx, vy, cxy);
        windows += 1;
    }
    if windows == 0 {
        return Err(SsimError::EmptyOverlap);
    }
    Ok(total / windows as f64)
}

/// `((2 mx my + C1)(2 cxy + C2)) / ((mx² + my² + C1)(vx + vy + C2))`.
#[inline]
pub fn ssim_formula(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64) -> f64 {
    ((2.0 * mx * my + C1) * (2.0 * cxy + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2))
}

/// Valid-mode separable correlation; output is `(w - n + 1) x (h - n + 1)`
/// indexed by window top-left corner.
fn correlate_valid(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let n = kernel.len();
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut tmp = vec![0f64; ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            let mut acc = 0.0;
            for (k, wt) in kernel.iter().enumerate() {
                acc += wt * row[x + k];
            }
            tmp[y * ow + x] = acc;
        }
    }
    let mut out = vec![0f64; ow * oh];
    for y in 0..oh {
        for (k, wt) in kernel.iter().enumerate() {
            let row = &tmp[(y + k) * ow..(y + k + 1) * ow];
            let dst = &mut out[y * ow..(y + 1) * ow];
            for (d, s) in dst.iter_mut().zip(row) {
                *d += wt * s;
            }
        }
    }
    out
}

/// Number of valid pixels in every `n x n` window, via an integral image.
fn window_counts(mask: &Mask, n: usize) -> Vec<u32> {
    let (w, h) = (mask.width(), mask.height());
    let mut integral = vec![0u32; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0u32;
        for x in 0..w {
            row += mask.get(x, y) as u32;
            integral[(y + 1) * (w + 1) + x + 1] = integral[y * (w + 1) + x + 1] + row;
        }
    }
    let (ow, oh) = (w - n + 1, h - n + 1);
    let at = |x: usize, y: usize| integral[y * (w + 1) + x];
    let mut out = vec![0u32; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = at(x + n, y + n) + at(x, y) - at(x + n, y) - at(x, y + n);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use proptest::prelude::*;

    /// Direct evaluation of every window, straight from the definition.
    fn brute_force(a: &GrayImage, b: &GrayImage, mask: &Mask, params: &SsimParams) -> Option<f64> {
        let n = params.window.size();
        let k = params.window.weights();
        let mut total = 0.0;
        let mut count = 0;
        for y0 in 0..=a.height() - n {
            for x0 in 0..=a.width() - n {
                let valid = (0..n)
                    .flat_map(|j| (0..n).map(move |i| (i, j)))
                    .filter(|&(i, j)| mask.get(x0 + i, y0 + j))
                    .count();
                if valid == 0 || (valid as f64) < params.min_valid_fraction * (n * n) as f64 {
                    continue;
                }
                let mut wsum = 0.0;
                let (mut mx, mut my) = (0.0, 0.0);
                for j in 0..n {
                    for i in 0..n {
                        if mask.get(x0 + i, y0 + j) {
                            let wt = k[i] * k[j];
                            wsum += wt;
                            mx += wt * a.get(x0 + i, y0 + j) as f64;
                            my += wt * b.get(x0 + i, y0 + j) as f64;
                        }
                    }
                }
                mx /= wsum;
                my /= wsum;
                let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
                for j in 0..n {
                    for i in 0..n {
                        if mask.get(x0 + i, y0 + j) {
                            let wt = k[i] * k[j] / wsum;
                            let dx = a.get(x0 + i, y0 + j) as f64 - mx;
                            let dy = b.get(x0 + i, y0 + j) as f64 - my;
                            vx += wt * dx * dx;
                            vy += wt * dy * dy;
                            cxy += wt * dx * dy;
                        }
                    }
                }
                let s = ((2.0 * mx * my + C1) * (2.0 * cxy + C2))
                    / ((mx * mx + my * my + C1) * (vx + vy + C2));
                total += s;
                count += 1;
            }
        }
        (count > 0).then(|| total / count as f64)
    }

    #[test]
    fn identical_inputs_score_exactly_one() {
        let img = synth::Die::random(1).base().clone();
        let mask = Mask::new(img.width(), img.height(), true);
        assert_eq!(ssim(&img, &img, &mask).unwrap(), 1.0);
        let noise = synth::uniform_noise(64, 48, 3);
        let mask = Mask::new(64, 48, true);
        assert_eq!(ssim(&noise, &noise, &mask).unwrap(), 1.0);
    }

    #[test]
    fn inverted_pattern_is_negative() {
        // Zero-mean-symmetric 8x8 pattern around 0.5 against its negative.
        let x = GrayImage::from_fn(8, 8, |i, j| if (i + j) % 2 == 0 { 0.8 } else { 0.2 });
        let y = GrayImage::from_fn(8, 8, |i, j| 1.0 - x.get(i, j));
        let mask = Mask::new(8, 8, true);
        let params = SsimParams {
            window: Window::Uniform { size: 8 },
            min_valid_fraction: 0.8,
        };
        let s = ssim_with(&x, &y, &mask, &params).unwrap();
        let oracle = brute_force(&x, &y, &mask, &params).unwrap();
        assert!(s < 0.0);
        assert!((s - oracle).abs() < 1e-9);
        // mu = 0.5, var = 0.09, cov = -0.09 for both
        let direct = ((2.0 * 0.25 + C1) * (-0.18 + C2)) / ((0.5 + C1) * (0.18 + C2));
        assert!((s - direct).abs() < 1e-6);
    }

    #[test]
    fn independent_noise_is_near_zero() {
        let a = synth::uniform_noise(400, 400, 10);
        let b = synth::uniform_noise(400, 400, 11);
        let mask = Mask::new(400, 400, true);
        assert!(ssim(&a, &b, &mask).unwrap().abs() < 0.1);
    }

    #[test]
    fn empty_overlap_and_size_mismatch() {
        let a = GrayImage::filled(20, 20, 0.5);
        assert_eq!(
            ssim(&a, &a, &Mask::new(20, 20, false)),
            Err(SsimError::EmptyOverlap)
        );
        let b = GrayImage::filled(20, 21, 0.5);
        assert!(matches!(
            ssim(&a, &b, &Mask::new(20, 20, true)),
            Err(SsimError::DimensionMismatch(..))
        ));
        let small = GrayImage::filled(5, 5, 0.5);
        assert_eq!(
            ssim(&small, &small, &Mask::new(5, 5, true)),
            Err(SsimError::EmptyOverlap)
        );
    }

    #[test]
    fn sparse_mask_skips_windows() {
        let a = synth::uniform_noise(30, 30, 1);
        let mut mask = Mask::new(30, 30, true);
        // Punch a hole large enough that some windows drop below 80%.
        for y in 10..20 {
            for x in 10..20 {
                mask.set(x, y, false);
            }
        }
        let params = SsimParams::default();
        let b = synth::uniform_noise(30, 30, 2);
        let s = ssim_with(&a, &b, &mask, &params).unwrap();
        let oracle = brute_force(&a, &b, &mask, &params).unwrap();
        assert!((s - oracle).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn matches_brute_force(seed_a in 0u64..1000, seed_b in 0u64..1000,
                               w in 11usize..28, h in 11usize..28, holes in 0usize..40) {
            let a = synth::uniform_noise(w, h, seed_a);
            let b = synth::uniform_noise(w, h, seed_b);
            let mut mask = Mask::new(w, h, true);
            for k in 0..holes {
                mask.set((k * 7 + seed_a as usize) % w, (k * 5 + seed_b as usize) % h, false);
            }
            for params in [SsimParams::default(),
                           SsimParams { window: Window::Uniform { size: 8 }, min_valid_fraction: 0.8 }] {
                let fast = ssim_with(&a, &b, &mask, &params);
                match brute_force(&a, &b, &mask, &params) {
                    Some(oracle) => prop_assert!((fast.unwrap() - oracle).abs() < 1e-9),
                    None => prop_assert_eq!(fast, Err(SsimError::EmptyOverlap)),
                }
            }
        }
    }
}
