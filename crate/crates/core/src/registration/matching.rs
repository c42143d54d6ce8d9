use serde::{Deserialize, Serialize};

use super::keypoints::Keypoint;
use super::RegistrationError;

/// Lowe-style ratio between best and second-best Hamming distance.
pub const DEFAULT_RATIO: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Match {
    /// Index into the first keypoint list.
    pub a: usize,
    /// Index into the second keypoint list.
    pub b: usize,
    /// Hamming distance between the two descriptors; lower is better.
    pub distance: u32,
}

/// One-to-one correspondences, sorted by `a`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchSet {
    pub pairs: Vec<Match>,
}

impl MatchSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn match_keypoints(a: &[Keypoint], b: &[Keypoint]) -> Result<MatchSet, RegistrationError> {
    match_keypoints_with_ratio(a, b, DEFAULT_RATIO)
}

/// Brute-force nearest neighbours with a ratio test, then at most one match
/// per keypoint of `b` (the closest wins, ties to the lower `a` index).
pub fn match_keypoints_with_ratio(
    a: &[Keypoint],
    b: &[Keypoint],
    ratio: f64,
) -> Result<MatchSet, RegistrationError> {
    if a.is_empty() || b.is_empty() {
        return Err(RegistrationError::NoMatches);
    }
    let mut best_for_b: Vec<Option<Match>> = vec![None; b.len()];
    for (ia, ka) in a.iter().enumerate() {
        let mut best = (u32::MAX, usize::MAX);
        let mut second = u32::MAX;
        for (ib, kb) in b.iter().enumerate() {
            let d = ka.descriptor.hamming(&kb.descriptor);
            if d < best.0 {
                second = best.0;
                best = (d, ib);
            } else if d < second {
                second = d;
            }
        }
        // With a single candidate there is no second neighbour to compare to.
        let passes = if second == u32::MAX {
            best.0 == 0
        } else {
            (best.0 as f64) < ratio * second as f64
        };
        if !passes {
            continue;
        }
        let candidate = Match {
            a: ia,
            b: best.1,
            distance: best.0,
        };
        let slot = &mut best_for_b[best.1];
        if slot.is_none_or(|m| candidate.distance < m.distance) {
            *slot = Some(candidate);
        }
    }
    let mut pairs: Vec<Match> = best_for_b.into_iter().flatten().collect();
    pairs.sort_by_key(|m| m.a);
    if pairs.is_empty() {
        return Err(RegistrationError::NoMatches);
    }
    Ok(MatchSet { pairs })
}
