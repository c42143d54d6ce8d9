//! Fixtures shared by the benchmarks.

use dielink_core::synth::{die_link_fixture, Jitter};
use dielink_core::{DistanceMatrix, NormalizedImage, ScoreOptions};

pub const SEED: u64 = 7;

/// `dies * coins_per_die` synthetic coins ready for scoring.
pub fn coins(dies: usize, coins_per_die: usize) -> Vec<NormalizedImage> {
    die_link_fixture(dies, coins_per_die, 0.05, Jitter::default(), SEED)
        .into_iter()
        .map(|c| NormalizedImage::from_gray(c.name, c.image))
        .collect()
}

/// Scored matrix over the given coins.
pub fn matrix(images: &[NormalizedImage]) -> DistanceMatrix {
    dielink_core::score_dataset(images, &ScoreOptions::with_seed(SEED)).expect("fixture scores")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_usable() {
        let images = coins(2, 2);
        assert_eq!(images.len(), 4);
        assert_eq!(matrix(&images).n_pairs(), 6);
    }
}
