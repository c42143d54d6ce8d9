//! Pair distances and the full pairwise distance set of a dataset.

mod dataset;
mod pair;
pub mod ssim;

pub use dataset::{
    potential_links, score_dataset, score_dataset_with_progress, DistanceMatrix, ScoringError,
};
pub use pair::{
    canonical_pair, distance_from_ssim, pair_distance, pair_seed, score_prepared, PairScore,
    PreparedImage, ScoreOptions, UNALIGNABLE_DISTANCE,
};
pub use ssim::{ssim, ssim_with, SsimError, SsimParams, Window};
