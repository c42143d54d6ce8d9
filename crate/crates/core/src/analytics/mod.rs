//! Views derived from a distance matrix: ascending ranking, the distance
//! curve and its knee, a 2D embedding and provisional single-linkage groups.
//!
//! Everything here is deterministic and free of randomness.

mod cluster;
mod curve;
mod embed;
mod rank;

use thiserror::Error;

pub use cluster::{cluster, ClusterLabel};
pub use curve::{build_curve, CurvePoint, DistanceCurve};
pub use embed::{embed_2d, EmbeddingPoint};
pub use rank::{rank_pairs, RankedPairs};

#[derive(Debug, Clone, Copy, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("threshold {0} must be a finite value in [0, 1]")]
    InvalidThreshold(f64),
}
