//! Multi-scale Harris corners with intensity-centroid orientation and
//! steered binary descriptors.

use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::image::{gaussian_kernel, GrayImage};

use super::RegistrationError;

/// Number of binary tests per descriptor.
pub const DESCRIPTOR_BITS: usize = 256;
const PATCH_RADIUS: isize = 15;
/// Sampling offsets stay inside this radius so any rotation fits the patch.
const PATTERN_RADIUS: f64 = 13.0;
const PATTERN_SEED: u64 = 0x5eed_d1e5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Descriptor(pub [u64; DESCRIPTOR_BITS / 64]);

impl Descriptor {
    #[inline]
    pub fn hamming(&self, other: &Descriptor) -> u32 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    /// Subpixel position in working-resolution pixels.
    pub x: f64,
    pub y: f64,
    /// Diameter of the described patch, in working-resolution pixels.
    pub scale: f64,
    /// Radians.
    pub orientation: f64,
    pub response: f64,
    pub descriptor: Descriptor,
}

#[derive(Debug, Clone)]
pub struct DetectorConfig {
    pub max_keypoints: usize,
    pub min_keypoints: usize,
    pub levels: usize,
    pub scale_factor: f64,
    pub harris_k: f64,
    /// Pre-smoothing before gradients.
    pub gradient_sigma: f64,
    /// Window of the structure tensor.
    pub tensor_sigma: f64,
    /// Smoothing of the image the binary tests read.
    pub descriptor_sigma: f64,
    /// Candidates below this fraction of the level's strongest response are dropped.
    pub relative_threshold: f64,
    pub absolute_threshold: f64,
    pub nms_radius: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            max_keypoints: 1000,
            min_keypoints: 8,
            levels: 4,
            scale_factor: 1.2,
            harris_k: 0.04,
            gradient_sigma: 1.0,
            tensor_sigma: 1.5,
            descriptor_sigma: 2.0,
            relative_threshold: 0.01,
            absolute_threshold: 1e-9,
            nms_radius: 3,
        }
    }
}

/// Detects up to `max_keypoints` keypoints. Output is fully determined by the
/// input pixels.
pub fn detect_keypoints_with(
    img: &GrayImage,
    config: &DetectorConfig,
) -> Result<Vec<Keypoint>, RegistrationError> {
    let quotas = level_quotas(config);
    let mut keypoints = Vec::new();
    for (level, quota) in quotas.into_iter().enumerate() {
        let factor = config.scale_factor.powi(level as i32);
        let w = (img.width() as f64 / factor).round() as usize;
        let h = (img.height() as f64 / factor).round() as usize;
        let margin = PATCH_RADIUS as usize + 3;
        if w <= 2 * margin || h <= 2 * margin {
            break;
        }
        let level_img = img.resample_area(w, h);
        let sx = img.width() as f64 / w as f64;
        let sy = img.height() as f64 / h as f64;
        let mut found = detect_level(&level_img, config, margin, quota);
        for kp in &mut found {
            kp.x = (kp.x + 0.5) * sx - 0.5;
            kp.y = (kp.y + 0.5) * sy - 0.5;
            kp.scale = (2 * PATCH_RADIUS + 1) as f64 * factor;
        }
        keypoints.extend(found);
    }
    keypoints.sort_by(|a, b| {
        b.response
            .total_cmp(&a.response)
            .then(a.y.total_cmp(&b.y))
            .then(a.x.total_cmp(&b.x))
    });
    keypoints.truncate(config.max_keypoints);
    if keypoints.len() < config.min_keypoints {
        return Err(RegistrationError::TooFewKeypoints {
            found: keypoints.len(),
        });
    }
    Ok(keypoints)
}

/// Geometric share of the keypoint budget per pyramid level.
fn level_quotas(config: &DetectorConfig) -> Vec<usize> {
    let f = 1.0 / config.scale_factor;
    let total: f64 = (0..config.levels).map(|l| f.powi(l as i32)).sum();
    (0..config.levels)
        .map(|l| {
            ((config.max_keypoints as f64 * f.powi(l as i32) / total).round() as usize).max(1)
        })
        .collect()
}

fn detect_level(
    img: &GrayImage,
    config: &DetectorConfig,
    margin: usize,
    quota: usize,
) -> Vec<Keypoint> {
    let (w, h) = (img.width(), img.height());
    let smooth = img.gaussian_blur(config.gradient_sigma);
    let mut ixx = vec![0f64; w * h];
    let mut iyy = vec![0f64; w * h];
    let mut ixy = vec![0f64; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let p = |dx: isize, dy: isize| {
                smooth.get((x as isize + dx) as usize, (y as isize + dy) as usize) as f64
            };
            let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1) - p(-1, -1) - 2.0 * p(-1, 0) - p(-1, 1))
                / 8.0;
            let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1) - p(-1, -1) - 2.0 * p(0, -1) - p(1, -1))
                / 8.0;
            let i = y * w + x;
            ixx[i] = gx * gx;
            iyy[i] = gy * gy;
            ixy[i] = gx * gy;
        }
    }
    let radius = (3.0 * config.tensor_sigma).ceil() as usize;
    let kernel = gaussian_kernel(config.tensor_sigma, radius);
    let ixx = blur_buffer(&ixx, w, h, &kernel);
    let iyy = blur_buffer(&iyy, w, h, &kernel);
    let ixy = blur_buffer(&ixy, w, h, &kernel);
    let response: Vec<f64> = (0..w * h)
        .map(|i| {
            let det = ixx[i] * iyy[i] - ixy[i] * ixy[i];
            let tr = ixx[i] + iyy[i];
            det - config.harris_k * tr * tr
        })
        .collect();

    let max_response = response.iter().copied().fold(0.0f64, f64::max);
    let threshold = config
        .absolute_threshold
        .max(config.relative_threshold * max_response);
    let r = config.nms_radius as isize;
    let mut candidates = Vec::new();
    for y in margin..h - margin {
        for x in margin..w - margin {
            let v = response[y * w + x];
            if v <= threshold {
                continue;
            }
            let mut is_max = true;
            'nms: for dy in -r..=r {
                for dx in -r..=r {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let j = (y as isize + dy) as usize * w + (x as isize + dx) as usize;
                    let u = response[j];
                    // Strict on one side so plateaus keep exactly one point.
                    if u > v || (u == v && (dy < 0 || (dy == 0 && dx < 0))) {
                        is_max = false;
                        break 'nms;
                    }
                }
            }
            if is_max {
                candidates.push((x, y, v));
            }
        }
    }
    candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0)));
    candidates.truncate(quota);

    let described = img.gaussian_blur(config.descriptor_sigma);
    candidates
        .into_iter()
        .map(|(x, y, v)| {
            let at = |dx: isize, dy: isize| {
                response[(y as isize + dy) as usize * w + (x as isize + dx) as usize]
            };
            let fx = x as f64 + parabola_offset(at(-1, 0), v, at(1, 0));
            let fy = y as f64 + parabola_offset(at(0, -1), v, at(0, 1));
            let orientation = intensity_centroid_angle(&described, x, y);
            Keypoint {
                x: fx,
                y: fy,
                scale: 0.0,
                orientation,
                response: v,
                descriptor: describe(&described, fx, fy, orientation),
            }
        })
        .collect()
}

fn parabola_offset(left: f64, center: f64, right: f64) -> f64 {
    let denom = left - 2.0 * center + right;
    if denom.abs() < 1e-300 {
        return 0.0;
    }
    (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
}

fn blur_buffer(buf: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let radius = (kernel.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, wt)| wt * buf[y * w + clamp(x as isize + k as isize - radius, w)])
                .sum();
        }
    }
    let mut out = vec![0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, wt)| wt * tmp[clamp(y as isize + k as isize - radius, h) * w + x])
                .sum();
        }
    }
    out
}

fn intensity_centroid_angle(img: &GrayImage, cx: usize, cy: usize) -> f64 {
    let mut m10 = 0.0;
    let mut m01 = 0.0;
    for dy in -PATCH_RADIUS..=PATCH_RADIUS {
        for dx in -PATCH_RADIUS..=PATCH_RADIUS {
            if dx * dx + dy * dy > PATCH_RADIUS * PATCH_RADIUS {
                continue;
            }
            let v = img.get((cx as isize + dx) as usize, (cy as isize + dy) as usize) as f64;
            m10 += dx as f64 * v;
            m01 += dy as f64 * v;
        }
    }
    m01.atan2(m10)
}

type TestPair = ((f64, f64), (f64, f64));

/// Fixed sampling pattern shared by every descriptor.
fn pattern() -> &'static [TestPair; DESCRIPTOR_BITS] {
    static PATTERN: OnceLock<[TestPair; DESCRIPTOR_BITS]> = OnceLock::new();
    PATTERN.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(PATTERN_SEED);
        let normal = Normal::new(0.0, (2 * PATCH_RADIUS + 1) as f64 / 5.0).unwrap();
        let point = |rng: &mut ChaCha8Rng| loop {
            let p: (f64, f64) = (normal.sample(rng), normal.sample(rng));
            if p.0.hypot(p.1) <= PATTERN_RADIUS {
                return p;
            }
        };
        let mut pairs = [((0.0, 0.0), (0.0, 0.0)); DESCRIPTOR_BITS];
        for pair in pairs.iter_mut() {
            loop {
                let p = point(&mut rng);
                let q = point(&mut rng);
                if (p.0 - q.0).hypot(p.1 - q.1) >= 2.0 {
                    *pair = (p, q);
                    break;
                }
            }
        }
        pairs
    })
}

fn describe(img: &GrayImage, x: f64, y: f64, angle: f64) -> Descriptor {
    let (s, c) = angle.sin_cos();
    let sample = |(px, py): (f64, f64)| {
        let rx = c * px - s * py;
        let ry = s * px + c * py;
        img.sample_bilinear(x + rx, y + ry).unwrap_or(0.0)
    };
    let mut words = [0u64; DESCRIPTOR_BITS / 64];
    for (i, &(p, q)) in pattern().iter().enumerate() {
        if sample(p) < sample(q) {
            words[i / 64] |= 1 << (i % 64);
        }
    }
    Descriptor(words)
}
