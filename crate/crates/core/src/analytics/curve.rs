use serde::{Deserialize, Serialize};

use super::rank::RankedPairs;

/// Maximum chord deviation below which a curve counts as a straight line.
const LINEAR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// 1-based rank.
    pub rank: usize,
    pub distance: f64,
}

/// Ranked distances and the rank where the slope breaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceCurve {
    pub points: Vec<CurvePoint>,
    pub knee_rank: Option<usize>,
}

/// Builds the ascending curve. The knee is the point farthest from the chord
/// joining the first and last points (first one on ties).
pub fn build_curve(ranked: &RankedPairs) -> DistanceCurve {
    let points: Vec<CurvePoint> = ranked
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| CurvePoint {
            rank: i + 1,
            distance: e.distance,
        })
        .collect();
    let knee_rank = knee(&points);
    DistanceCurve { points, knee_rank }
}

fn knee(points: &[CurvePoint]) -> Option<usize> {
    if points.len() < 3 {
        return None;
    }
    let first = points[0];
    let last = points[points.len() - 1];
    let dx = (last.rank - first.rank) as f64;
    let dy = last.distance - first.distance;
    let norm = dx.hypot(dy);
    let mut best: Option<(usize, f64)> = None;
    for p in points {
        let dev = (dy * (p.rank - first.rank) as f64 - dx * (p.distance - first.distance)).abs()
            / norm;
        if best.is_none_or(|(_, b)| dev > b) {
            best = Some((p.rank, dev));
        }
    }
    let (rank, dev) = best?;
    // Perpendicular distance scaled back to a vertical offset for the check.
    (dev * norm / dx > LINEAR_TOLERANCE).then_some(rank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::PairScore;

    fn ranked(ds: &[f64]) -> RankedPairs {
        RankedPairs::from_scores(
            ds.iter()
                .enumerate()
                .map(|(i, &d)| PairScore {
                    name1: format!("a{i:04}"),
                    name2: format!("b{i:04}"),
                    distance: d,
                    alignable: true,
                    transform: None,
                })
                .collect(),
        )
    }

    #[test]
    fn single_point_has_no_knee() {
        let c = build_curve(&ranked(&[0.3]));
        assert_eq!(c.points, vec![CurvePoint { rank: 1, distance: 0.3 }]);
        assert_eq!(c.knee_rank, None);
    }

    #[test]
    fn straight_line_has_no_knee() {
        let ds: Vec<f64> = (0..50).map(|i| 0.1 + 0.01 * i as f64).collect();
        assert_eq!(build_curve(&ranked(&ds)).knee_rank, None);
        assert_eq!(build_curve(&ranked(&[0.5, 0.5, 0.5, 0.5])).knee_rank, None);
    }

    /// Brute-force chord distances, computed independently of `knee`.
    fn brute_knee(ds: &[f64]) -> usize {
        let n = ds.len();
        let (x1, y1, x2, y2) = (1.0, ds[0], n as f64, ds[n - 1]);
        let mut best = (0, -1.0);
        for (i, &d) in ds.iter().enumerate() {
            let (x0, y0) = ((i + 1) as f64, d);
            let num = ((y2 - y1) * x0 - (x2 - x1) * y0 + x2 * y1 - y2 * x1).abs();
            let den = ((y2 - y1).powi(2) + (x2 - x1).powi(2)).sqrt();
            if num / den > best.1 {
                best = (i + 1, num / den);
            }
        }
        best.0
    }

    #[test]
    fn two_slope_curve() {
        let mut ds: Vec<f64> = (0..10).map(|i| 0.05 + 0.25 * i as f64 / 9.0).collect();
        ds.extend((0..90).map(|i| 0.60 + 0.35 * i as f64 / 89.0));
        let c = build_curve(&ranked(&ds));
        let k = c.knee_rank.unwrap();
        assert_eq!(k, brute_knee(&ds));
        assert!((9..=12).contains(&k), "knee {k}");
        assert!(c.points.windows(2).all(|w| w[0].distance <= w[1].distance));
    }
}
