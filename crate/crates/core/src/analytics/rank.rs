use serde::{Deserialize, Serialize};

use crate::scoring::{DistanceMatrix, PairScore};

/// Pairs by ascending distance, ties broken by `(name1, name2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPairs {
    pub entries: Vec<PairScore>,
}

impl RankedPairs {
    /// Sorts arbitrary scores into ranking order.
    pub fn from_scores(mut entries: Vec<PairScore>) -> Self {
        entries.sort_by(|a, b| {
            a.distance
                .total_cmp(&b.distance)
                .then_with(|| a.name1.cmp(&b.name1))
                .then_with(|| a.name2.cmp(&b.name2))
        });
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn rank_pairs(matrix: &DistanceMatrix) -> RankedPairs {
    RankedPairs::from_scores(matrix.scores().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn score(a: &str, b: &str, d: f64) -> PairScore {
        PairScore {
            name1: a.into(),
            name2: b.into(),
            distance: d,
            alignable: true,
            transform: None,
        }
    }

    fn matrix(d: &[f64]) -> DistanceMatrix {
        // three coins a, b, c
        DistanceMatrix::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![score("a", "b", d[0]), score("a", "c", d[1]), score("b", "c", d[2])],
        )
        .unwrap()
    }

    #[test]
    fn ascending_order() {
        let r = rank_pairs(&matrix(&[0.9, 0.1, 0.5]));
        let d: Vec<f64> = r.entries.iter().map(|e| e.distance).collect();
        assert_eq!(d, vec![0.1, 0.5, 0.9]);
    }

    #[test]
    fn ties_break_by_names() {
        let r = rank_pairs(&matrix(&[0.4, 0.4, 0.4]));
        let names: Vec<_> = r
            .entries
            .iter()
            .map(|e| (e.name1.as_str(), e.name2.as_str()))
            .collect();
        assert_eq!(names, vec![("a", "b"), ("a", "c"), ("b", "c")]);
    }

    /// Insertion sort on (distance, name1, name2): an independent oracle.
    fn oracle(scores: &[PairScore]) -> Vec<PairScore> {
        let mut out: Vec<PairScore> = Vec::new();
        for s in scores {
            let key = |p: &PairScore| (p.distance, p.name1.clone(), p.name2.clone());
            let pos = out
                .iter()
                .position(|o| key(o).partial_cmp(&key(s)) == Some(std::cmp::Ordering::Greater))
                .unwrap_or(out.len());
            out.insert(pos, s.clone());
        }
        out
    }

    proptest! {
        #[test]
        fn equals_full_sort_oracle(ds in prop::collection::vec(0u32..20, 45)) {
            // 10 coins -> 45 pairs; coarse distances force many ties
            let names: Vec<String> = (0..10).map(|i| format!("c{i}")).collect();
            let mut scores = Vec::new();
            let mut k = 0;
            for i in 0..10 {
                for j in i + 1..10 {
                    scores.push(score(&names[i], &names[j], ds[k] as f64 / 20.0));
                    k += 1;
                }
            }
            let m = DistanceMatrix::new(names, scores.clone()).unwrap();
            let ranked = rank_pairs(&m);
            prop_assert_eq!(&ranked.entries, &oracle(&scores));
            prop_assert!(ranked.entries.windows(2).all(|w| w[0].distance <= w[1].distance));
        }
    }
}
