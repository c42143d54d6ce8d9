use serde::{Deserialize, Serialize};

use crate::imaging::NormalizedImage;
use crate::registration::{
    detect_keypoints_with, register, warp_into, warp_mask_into, ConsensusConfig, DetectorConfig,
    Keypoint, RegistrationError, SimilarityTransform,
};

use super::ssim::{ssim_with, SsimParams};

/// Distance given to pairs that cannot be aligned or compared.
pub const UNALIGNABLE_DISTANCE: f64 = 1.0;

/// Distance of one unordered pair, stored with `name1 < name2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub name1: String,
    pub name2: String,
    pub distance: f64,
    pub alignable: bool,
    /// Maps `name1` image coordinates onto `name2` image coordinates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<SimilarityTransform>,
}

impl PairScore {
    pub fn unalignable(a: &str, b: &str) -> Self {
        let (name1, name2) = canonical_pair(a, b);
        Self {
            name1: name1.to_owned(),
            name2: name2.to_owned(),
            distance: UNALIGNABLE_DISTANCE,
            alignable: false,
            transform: None,
        }
    }

    pub fn involves(&self, name: &str) -> bool {
        self.name1 == name || self.name2 == name
    }
}

/// Orders two names lexicographically.
pub fn canonical_pair<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Maps SSIM in `[-1, 1]` onto a distance in `[0, 1]`, 0 meaning identical.
pub fn distance_from_ssim(s: f64) -> f64 {
    ((1.0 - s) / 2.0).clamp(0.0, 1.0)
}

/// Consensus seed of a pair: FNV-1a of both canonical names mixed with the
/// run seed, so rankings are reproducible and independent of pair order.
pub fn pair_seed(a: &str, b: &str, seed: u64) -> u64 {
    let (n1, n2) = canonical_pair(a, b);
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in n1.bytes().chain(std::iter::once(0)).chain(n2.bytes()) {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

#[derive(Debug, Clone, Default)]
pub struct ScoreOptions {
    pub seed: u64,
    pub detector: DetectorConfig,
    /// The seed field is overridden per pair by [`pair_seed`].
    pub consensus: ConsensusConfig,
    pub ssim: SsimParams,
}

impl ScoreOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// A normalized image with its keypoints, computed once per dataset.
#[derive(Debug, Clone)]
pub struct PreparedImage {
    pub image: NormalizedImage,
    pub keypoints: Result<Vec<Keypoint>, RegistrationError>,
}

impl PreparedImage {
    pub fn new(image: NormalizedImage, detector: &DetectorConfig) -> Self {
        let keypoints = detect_keypoints_with(&image.image, detector);
        Self { image, keypoints }
    }

    pub fn name(&self) -> &str {
        &self.image.source_name
    }
}

/// Registers and scores two images with default options.
pub fn pair_distance(a: &NormalizedImage, b: &NormalizedImage) -> PairScore {
    let opts = ScoreOptions::default();
    let a = PreparedImage::new(a.clone(), &opts.detector);
    let b = PreparedImage::new(b.clone(), &opts.detector);
    score_prepared(&a, &b, &opts)
}

/// Scores a prepared pair. The image with the larger coin is the reference
/// (ties go to the lexicographically first name); the other one is warped
/// onto it and SSIM is taken over the overlap of both coins.
pub fn score_prepared(a: &PreparedImage, b: &PreparedImage, opts: &ScoreOptions) -> PairScore {
    let a_first = a.name() <= b.name();
    let (first, second) = if a_first { (a, b) } else { (b, a) };
    let second_is_reference = second.image.extent > first.image.extent;
    let (reference, moving) = if second_is_reference {
        (second, first)
    } else {
        (first, second)
    };
    let unalignable = || PairScore::unalignable(a.name(), b.name());

    let (Ok(kr), Ok(km)) = (&reference.keypoints, &moving.keypoints) else {
        return unalignable();
    };
    let consensus = ConsensusConfig {
        seed: pair_seed(a.name(), b.name(), opts.seed),
        ..opts.consensus.clone()
    };
    // Maps reference coordinates onto moving coordinates.
    let Ok(estimate) = register(kr, km, &consensus) else {
        return unalignable();
    };
    let ref_to_moving = estimate.transform;
    let moving_to_ref = ref_to_moving.inverse();

    let (w, h) = (reference.image.width(), reference.image.height());
    let (warped, valid) = warp_into(&moving.image.image, &moving_to_ref, w, h);
    let mut overlap = valid;
    if let Some(fg) = &reference.image.foreground {
        overlap = overlap.and(fg);
    }
    if let Some(fg) = &moving.image.foreground {
        overlap = overlap.and(&warp_mask_into(fg, &moving_to_ref, w, h));
    }
    let Ok(s) = ssim_with(&reference.image.image, &warped, &overlap, &opts.ssim) else {
        return unalignable();
    };

    // Report the transform canonically: first name's frame onto the second's.
    let transform = if second_is_reference {
        moving_to_ref
    } else {
        ref_to_moving
    };
    PairScore {
        name1: first.name().to_owned(),
        name2: second.name().to_owned(),
        distance: distance_from_ssim(s),
        alignable: true,
        transform: Some(transform),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::GrayImage;
    use crate::synth;

    fn coin(seed: u64, name: &str) -> NormalizedImage {
        NormalizedImage::from_gray(name, synth::Die::random(seed).base().clone())
    }

    #[test]
    fn self_pair_is_near_zero() {
        let x = coin(21, "x.png");
        let s = pair_distance(&x, &x.clone().with_name("y.png"));
        assert!(s.alignable);
        assert!(s.distance <= 0.01, "distance {}", s.distance);
    }

    #[test]
    fn uniform_image_is_unalignable() {
        let flat = NormalizedImage::from_gray("flat.png", GrayImage::filled(440, 440, 0.4));
        let s = pair_distance(&coin(1, "c.png"), &flat);
        assert!(!s.alignable);
        assert_eq!(s.distance, 1.0);
        assert_eq!((s.name1.as_str(), s.name2.as_str()), ("c.png", "flat.png"));
    }

    #[test]
    fn argument_order_does_not_matter() {
        let die = synth::Die::random(5);
        let pose = SimilarityTransform::about((219.5, 219.5), 0.1, 1.03, (4.0, -6.0));
        let a = NormalizedImage::from_gray("a.png", die.strike(&SimilarityTransform::identity(), 0.05, 1));
        let b = NormalizedImage::from_gray("b.png", die.strike(&pose, 0.05, 2));
        let ab = pair_distance(&a, &b);
        let ba = pair_distance(&b, &a);
        assert_eq!(ab, ba);
        assert!(ab.alignable);
        // name1 -> name2 transform is the strike pose within tolerance
        let t = ab.transform.unwrap();
        assert!((t.rotation - 0.1).abs() < 0.01, "{t:?}");
        assert!((t.scale - 1.03).abs() < 0.01, "{t:?}");
    }

    #[test]
    fn distance_mapping() {
        assert_eq!(distance_from_ssim(1.0), 0.0);
        assert_eq!(distance_from_ssim(-1.0), 1.0);
        assert_eq!(distance_from_ssim(0.0), 0.5);
        assert_eq!(distance_from_ssim(-3.0), 1.0);
    }

    #[test]
    fn pair_seed_is_symmetric() {
        assert_eq!(pair_seed("a", "b", 3), pair_seed("b", "a", 3));
        assert_ne!(pair_seed("a", "b", 3), pair_seed("a", "b", 4));
        assert_ne!(pair_seed("ab", "c", 0), pair_seed("a", "bc", 0));
    }
}
