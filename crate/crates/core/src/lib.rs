//! Core algorithms for die-link studies of coin photographs.
//!
//! Every pair of same-type coin images is aligned (interest points, binary
//! descriptors, robust similarity fit) and scored with a masked SSIM. The
//! score is mapped to a distance in `[0, 1]` where values near 0 suggest the
//! two coins were struck by the same die. Pairs are then ranked by ascending
//! distance for human review.
//!
//! # Pipeline
//! - [`imaging`]: decoding, grayscale conversion, coin segmentation and
//!   normalization to the ~400px working resolution.
//! - [`registration`]: keypoints, matching, consensus fitting and warping.
//! - [`scoring`]: SSIM, pair distance and whole-dataset scoring.
//! - [`analytics`]: ranking, distance curve with knee, 2D embedding and
//!   provisional clustering.
//! - [`notations`]: the evaluation categories and the results CSV format.
//! - [`synth`]: synthetic dies and struck coins for tests and benchmarks.

pub mod analytics;
pub mod image;
pub mod imaging;
pub mod notations;
pub mod registration;
pub mod scoring;
pub mod synth;

pub use crate::image::{GrayImage, Mask};
pub use analytics::{
    build_curve, cluster, embed_2d, rank_pairs, ClusterLabel, DistanceCurve, EmbeddingPoint,
    RankedPairs,
};
pub use imaging::{
    estimate_effective_size, load_image, normalize, prepare, EffectiveSize, NormalizedImage,
    QualityWarning,
};
pub use notations::{Note, NotationRow};
pub use registration::{
    detect_keypoints, estimate_transform, match_keypoints, warp, Keypoint, MatchSet,
    SimilarityTransform,
};
pub use scoring::{
    canonical_pair, pair_distance, potential_links, score_dataset, ssim, DistanceMatrix,
    PairScore, ScoreOptions,
};
