use serde::{Deserialize, Serialize};

use crate::scoring::DistanceMatrix;

use super::AnalyticsError;

/// Provisional group of a coin. Groups are a review aid, never a verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLabel {
    pub coin_name: String,
    pub cluster_id: usize,
    pub provisional: bool,
}

/// Single-linkage groups: coins joined by a chain of pair distances
/// `<= threshold` share a cluster. Ids are contiguous from 0 in order of the
/// first member's position in the sorted coin list.
pub fn cluster(matrix: &DistanceMatrix, threshold: f64) -> Result<Vec<ClusterLabel>, AnalyticsError> {
    if !threshold.is_finite() || !(0.0..=1.0).contains(&threshold) {
        return Err(AnalyticsError::InvalidThreshold(threshold));
    }
    let n = matrix.n_coins();
    let mut forest = DisjointSet::new(n);
    for s in matrix.scores() {
        if s.distance <= threshold {
            let i = matrix.position(&s.name1).expect("score names are coins");
            let j = matrix.position(&s.name2).expect("score names are coins");
            forest.union(i, j);
        }
    }
    let mut ids = vec![usize::MAX; n];
    let mut next = 0;
    Ok(matrix
        .coin_names()
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let root = forest.find(i);
            if ids[root] == usize::MAX {
                ids[root] = next;
                next += 1;
            }
            ClusterLabel {
                coin_name: name.clone(),
                cluster_id: ids[root],
                provisional: true,
            }
        })
        .collect())
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}
