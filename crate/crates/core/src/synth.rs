//! Synthetic coins for tests, benchmarks and the acceptance suite.
//!
//! A [`Die`] is a random smooth relief: a coin disc with a rim, blobs, strokes
//! and a bead ring. Striking a die places the relief under a random similarity
//! jitter and adds independent Gaussian noise, so two coins from one die differ
//! only by pose and noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::image::GrayImage;
use crate::registration::{warp_into, SimilarityTransform};

/// Side of the square frame holding a synthetic coin.
pub const COIN_FRAME: usize = 440;
/// Radius of the synthetic coin disc.
pub const COIN_RADIUS: f64 = 170.0;
const BACKGROUND: f32 = 0.08;

/// White-on-black (by default) disc of `diameter` centered in a square frame.
pub fn disc(size: usize, diameter: f64, fg: f32, bg: f32) -> GrayImage {
    let c = (size as f64 - 1.0) / 2.0;
    let r = diameter / 2.0;
    GrayImage::from_fn(size, size, |x, y| {
        // Pixel counts as inside when its center is within the radius.
        let d = (x as f64 - c).hypot(y as f64 - c);
        if d <= r {
            fg
        } else {
            bg
        }
    })
}

pub fn checkerboard(size: usize, square: usize) -> GrayImage {
    GrayImage::from_fn(size, size, |x, y| {
        if (x / square + y / square) % 2 == 0 {
            0.9
        } else {
            0.1
        }
    })
}

pub fn uniform_noise(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GrayImage::from_fn(width, height, |_, _| rng.random::<f32>())
}

/// Adds zero-mean Gaussian noise and clamps to `[0, 1]`.
pub fn add_gaussian_noise(img: &GrayImage, sigma: f64, seed: u64) -> GrayImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    GrayImage::from_fn(img.width(), img.height(), |x, y| {
        img.get(x, y) + normal.sample(&mut rng) as f32
    })
}

/// Bounds of the random pose given to each struck coin.
#[derive(Debug, Clone, Copy)]
pub struct Jitter {
    pub max_rotation_deg: f64,
    pub min_scale: f64,
    pub max_scale: f64,
    pub max_translation: f64,
}

impl Default for Jitter {
    fn default() -> Self {
        Self {
            max_rotation_deg: 15.0,
            min_scale: 0.9,
            max_scale: 1.1,
            max_translation: 20.0,
        }
    }
}

impl Jitter {
    /// Draws a pose about the frame center.
    pub fn sample(&self, rng: &mut impl Rng, frame: usize) -> SimilarityTransform {
        let rot = rng
            .random_range(-self.max_rotation_deg..=self.max_rotation_deg)
            .to_radians();
        let scale = rng.random_range(self.min_scale..=self.max_scale);
        let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let radius = self.max_translation * rng.random::<f64>().sqrt();
        let c = (frame as f64 - 1.0) / 2.0;
        SimilarityTransform::about((c, c), rot, scale, (radius * angle.cos(), radius * angle.sin()))
    }
}

/// A random coin relief.
#[derive(Debug, Clone)]
pub struct Die {
    base: GrayImage,
}

impl Die {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let size = COIN_FRAME;
        let c = (size as f64 - 1.0) / 2.0;
        let inner = COIN_RADIUS - 14.0;

        struct Blob {
            x: f64,
            y: f64,
            sigma: f64,
            amp: f64,
        }
        struct Stroke {
            a: (f64, f64),
            b: (f64, f64),
            half_width: f64,
            amp: f64,
        }
        let in_disc = |rng: &mut ChaCha8Rng, r: f64| loop {
            let x = rng.random_range(-r..r);
            let y = rng.random_range(-r..r);
            if x.hypot(y) < r {
                return (c + x, c + y);
            }
        };
        let signed = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
            let v = rng.random_range(lo..hi);
            if rng.random::<bool>() {
                v
            } else {
                -v
            }
        };
        let blobs: Vec<Blob> = (0..28)
            .map(|_| {
                let (x, y) = in_disc(&mut rng, inner - 12.0);
                Blob {
                    x,
                    y,
                    sigma: rng.random_range(3.0..11.0),
                    amp: signed(&mut rng, 0.12, 0.3),
                }
            })
            .collect();
        let strokes: Vec<Stroke> = (0..16)
            .map(|_| {
                let a = in_disc(&mut rng, inner - 20.0);
                let len = rng.random_range(15.0..60.0);
                let ang: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                Stroke {
                    a,
                    b: (a.0 + len * ang.cos(), a.1 + len * ang.sin()),
                    half_width: rng.random_range(1.2..2.5),
                    amp: signed(&mut rng, 0.18, 0.32),
                }
            })
            .collect();
        let beads: Vec<(f64, f64)> = (0..36)
            .map(|_| {
                let ang: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let r = inner - 6.0;
                (c + r * ang.cos(), c + r * ang.sin())
            })
            .collect();

        let relief = GrayImage::from_fn(size, size, |x, y| {
            let (px, py) = (x as f64, y as f64);
            let r = (px - c).hypot(py - c);
            if r > COIN_RADIUS {
                return BACKGROUND;
            }
            if r > inner {
                return 0.78;
            }
            let mut v = 0.5;
            for b in &blobs {
                let d2 = (px - b.x).powi(2) + (py - b.y).powi(2);
                if d2 < 16.0 * b.sigma * b.sigma {
                    v += b.amp * (-d2 / (2.0 * b.sigma * b.sigma)).exp();
                }
            }
            for s in &strokes {
                if segment_distance((px, py), s.a, s.b) <= s.half_width {
                    v += s.amp;
                }
            }
            for b in &beads {
                if (px - b.0).hypot(py - b.1) <= 2.5 {
                    v += 0.25;
                }
            }
            v.clamp(0.2, 0.95) as f32
        });
        Self {
            base: relief.gaussian_blur(1.0),
        }
    }

    pub fn base(&self) -> &GrayImage {
        &self.base
    }

    /// A coin struck with this die under `pose`, plus noise of `sigma`.
    pub fn strike(&self, pose: &SimilarityTransform, sigma: f64, noise_seed: u64) -> GrayImage {
        let (w, h) = (self.base.width(), self.base.height());
        let (moved, valid) = warp_into(&self.base, pose, w, h);
        let filled = GrayImage::from_fn(w, h, |x, y| {
            if valid.get(x, y) {
                moved.get(x, y)
            } else {
                BACKGROUND
            }
        });
        add_gaussian_noise(&filled, sigma, noise_seed)
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let len2 = abx * abx + aby * aby;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * abx + (p.1 - a.1) * aby) / len2).clamp(0.0, 1.0)
    };
    (p.0 - (a.0 + t * abx)).hypot(p.1 - (a.1 + t * aby))
}

fn to_luma8(img: &GrayImage) -> image::GrayImage {
    let raw = img.pixels().iter().map(|v| (v * 255.0).round() as u8).collect();
    image::GrayImage::from_raw(img.width() as u32, img.height() as u32, raw).expect("sized buffer")
}

/// 8-bit grayscale PNG.
pub fn encode_png(img: &GrayImage) -> Vec<u8> {
    let mut out = std::io::Cursor::new(Vec::new());
    to_luma8(img)
        .write_to(&mut out, image::ImageFormat::Png)
        .expect("in-memory png");
    out.into_inner()
}

/// Baseline JPEG at `quality` (1-100).
pub fn encode_jpeg(img: &GrayImage, quality: u8) -> Vec<u8> {
    let mut out = Vec::new();
    image::codecs::jpeg::JpegEncoder::new_with_quality(&mut out, quality)
        .encode_image(&to_luma8(img))
        .expect("in-memory jpeg");
    out
}

/// A struck coin with its provenance.
#[derive(Debug, Clone)]
pub struct SyntheticCoin {
    pub name: String,
    pub die: usize,
    pub pose: SimilarityTransform,
    pub image: GrayImage,
}

/// `dies x coins_per_die` coins, each a jittered strike with noise `sigma`.
/// Fully determined by `seed`.
pub fn die_link_fixture(
    dies: usize,
    coins_per_die: usize,
    sigma: f64,
    jitter: Jitter,
    seed: u64,
) -> Vec<SyntheticCoin> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coins = Vec::with_capacity(dies * coins_per_die);
    for d in 0..dies {
        let die = Die::random(rng.random());
        for k in 0..coins_per_die {
            let pose = jitter.sample(&mut rng, COIN_FRAME);
            let image = die.strike(&pose, sigma, rng.random());
            coins.push(SyntheticCoin {
                name: format!("die{d:02}-coin{k:02}.png"),
                die: d,
                pose,
                image,
            });
        }
    }
    coins
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disc_has_requested_diameter() {
        let img = disc(400, 200.0, 1.0, 0.0);
        let row: usize = (0..400).filter(|&x| img.get(x, 200) > 0.5).count();
        assert!(row.abs_diff(200) <= 1);
    }

    #[test]
    fn fixture_is_deterministic() {
        let a = die_link_fixture(2, 2, 0.05, Jitter::default(), 9);
        let b = die_link_fixture(2, 2, 0.05, Jitter::default(), 9);
        assert_eq!(a.len(), 4);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.image, y.image);
            assert_eq!(x.name, y.name);
        }
        assert_ne!(a[0].image, a[1].image);
    }

    #[test]
    fn png_round_trip_is_8_bit_exact() {
        let img = Die::random(3).base().clone();
        let back = crate::imaging::load_image(&encode_png(&img)).unwrap();
        let worst = img
            .pixels()
            .iter()
            .zip(back.pixels())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(worst <= 0.5 / 255.0 + 1e-6, "{worst}");
    }
}
