//! Alignment of two normalized coin images: interest points with binary
//! descriptors, ratio-test matching, and a robust similarity fit.

mod consensus;
mod keypoints;
mod matching;
mod transform;
mod warp;

use thiserror::Error;

use crate::imaging::NormalizedImage;

pub use consensus::{
    estimate_from_points, estimate_transform, fit_similarity, ConsensusConfig, TransformEstimate,
};
pub use keypoints::{detect_keypoints_with, Descriptor, DetectorConfig, Keypoint, DESCRIPTOR_BITS};
pub use matching::{match_keypoints, match_keypoints_with_ratio, Match, MatchSet, DEFAULT_RATIO};
pub use transform::SimilarityTransform;
pub use warp::{warp, warp_into, warp_mask_into, Warped};

/// Reasons a pair cannot be aligned. Every variant makes the pair score as
/// unalignable (distance 1).
#[derive(Debug, Clone, Error, PartialEq)]
pub enum RegistrationError {
    #[error("only {found} keypoints detected")]
    TooFewKeypoints { found: usize },
    #[error("no descriptor matches survived the ratio test")]
    NoMatches,
    #[error("{found} matches, at least 3 are needed")]
    NotEnoughMatches { found: usize },
    #[error("correspondences are geometrically degenerate")]
    DegenerateGeometry,
    #[error("consensus too weak: inlier ratio {inlier_ratio:.3}")]
    ConsensusFailure { inlier_ratio: f64 },
}

/// Keypoints with the default detector settings.
pub fn detect_keypoints(img: &NormalizedImage) -> Result<Vec<Keypoint>, RegistrationError> {
    detect_keypoints_with(&img.image, &DetectorConfig::default())
}

/// Full registration of two keypoint sets: match, then fit. The returned
/// transform maps coordinates of `a` onto `b`.
pub fn register(
    a: &[Keypoint],
    b: &[Keypoint],
    config: &ConsensusConfig,
) -> Result<TransformEstimate, RegistrationError> {
    let matches = match_keypoints(a, b)?;
    estimate_transform(&matches, a, b, config)
}
