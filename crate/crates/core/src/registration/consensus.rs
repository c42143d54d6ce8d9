//! Robust similarity fitting: random sample consensus over two-point
//! hypotheses followed by least-squares refinement on the inliers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::keypoints::Keypoint;
use super::matching::MatchSet;
use super::transform::SimilarityTransform;
use super::RegistrationError;

#[derive(Debug, Clone)]
pub struct ConsensusConfig {
    pub iterations: usize,
    /// Maximum reprojection error of an inlier, in pixels.
    pub inlier_threshold: f64,
    pub min_inlier_ratio: f64,
    pub min_inliers: usize,
    pub seed: u64,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            inlier_threshold: 3.0,
            min_inlier_ratio: 0.3,
            min_inliers: 3,
            seed: 0,
        }
    }
}

impl ConsensusConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformEstimate {
    /// Maps points of the first image onto the second.
    pub transform: SimilarityTransform,
    /// Indices of inlier correspondences.
    pub inliers: Vec<usize>,
    pub inlier_ratio: f64,
    /// Root-mean-square inlier residual, in pixels.
    pub rms_residual: f64,
}

/// Estimates `T` with `T(a[m.a]) ≈ b[m.b]` for the consensus of `matches`.
pub fn estimate_transform(
    matches: &MatchSet,
    a: &[Keypoint],
    b: &[Keypoint],
    config: &ConsensusConfig,
) -> Result<TransformEstimate, RegistrationError> {
    let (src, dst): (Vec<_>, Vec<_>) = matches
        .pairs
        .iter()
        .map(|m| ((a[m.a].x, a[m.a].y), (b[m.b].x, b[m.b].y)))
        .unzip();
    estimate_from_points(&src, &dst, config)
}

/// Point-correspondence form of [`estimate_transform`].
pub fn estimate_from_points(
    src: &[(f64, f64)],
    dst: &[(f64, f64)],
    config: &ConsensusConfig,
) -> Result<TransformEstimate, RegistrationError> {
    assert_eq!(src.len(), dst.len(), "correspondence lists differ in length");
    let n = src.len();
    if n < 3 {
        return Err(RegistrationError::NotEnoughMatches { found: n });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let threshold_sq = config.inlier_threshold * config.inlier_threshold;
    let mut best: Option<(usize, f64, SimilarityTransform)> = None;
    for _ in 0..config.iterations {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let Some(t) = two_point_similarity(src[i], src[j], dst[i], dst[j]) else {
            continue;
        };
        let (count, cost) = score(&t, src, dst, threshold_sq);
        let better = match best {
            None => true,
            Some((bc, bcost, _)) => count > bc || (count == bc && cost < bcost),
        };
        if better {
            best = Some((count, cost, t));
        }
    }
    let Some((_, _, mut transform)) = best else {
        return Err(RegistrationError::DegenerateGeometry);
    };

    let mut inliers = inlier_indices(&transform, src, dst, threshold_sq);
    for _ in 0..10 {
        let (s, d): (Vec<_>, Vec<_>) = inliers.iter().map(|&k| (src[k], dst[k])).unzip();
        let Some(refit) = fit_similarity(&s, &d) else {
            break;
        };
        let next = inlier_indices(&refit, src, dst, threshold_sq);
        if next.len() < inliers.len() {
            break;
        }
        transform = refit;
        if next == inliers {
            break;
        }
        inliers = next;
    }

    let inlier_ratio = inliers.len() as f64 / n as f64;
    if inliers.len() < config.min_inliers || inlier_ratio < config.min_inlier_ratio {
        return Err(RegistrationError::ConsensusFailure { inlier_ratio });
    }
    let rms_residual = (inliers
        .iter()
        .map(|&k| sq_dist(transform.apply(src[k]), dst[k]))
        .sum::<f64>()
        / inliers.len() as f64)
        .sqrt();
    Ok(TransformEstimate {
        transform,
        inliers,
        inlier_ratio,
        rms_residual,
    })
}

#[inline]
fn sq_dist(p: (f64, f64), q: (f64, f64)) -> f64 {
    (p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)
}

fn score(
    t: &SimilarityTransform,
    src: &[(f64, f64)],
    dst: &[(f64, f64)],
    threshold_sq: f64,
) -> (usize, f64) {
    let mut count = 0;
    let mut cost = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let e = sq_dist(t.apply(*s), *d);
        if e <= threshold_sq {
            count += 1;
            cost += e;
        } else {
            cost += threshold_sq;
        }
    }
    (count, cost)
}

fn inlier_indices(
    t: &SimilarityTransform,
    src: &[(f64, f64)],
    dst: &[(f64, f64)],
    threshold_sq: f64,
) -> Vec<usize> {
    (0..src.len())
        .filter(|&k| sq_dist(t.apply(src[k]), dst[k]) <= threshold_sq)
        .collect()
}

/// Exact similarity through two correspondences, treating points as complex
/// numbers: `q = a * p + t`.
fn two_point_similarity(
    p1: (f64, f64),
    p2: (f64, f64),
    q1: (f64, f64),
    q2: (f64, f64),
) -> Option<SimilarityTransform> {
    let (dpx, dpy) = (p2.0 - p1.0, p2.1 - p1.1);
    let (dqx, dqy) = (q2.0 - q1.0, q2.1 - q1.1);
    let norm = dpx * dpx + dpy * dpy;
    if norm < 1.0 || dqx * dqx + dqy * dqy < 1e-12 {
        return None;
    }
    // a = dq / dp
    let a = (dqx * dpx + dqy * dpy) / norm;
    let b = (dqy * dpx - dqx * dpy) / norm;
    let t = (q1.0 - (a * p1.0 - b * p1.1), q1.1 - (b * p1.0 + a * p1.1));
    Some(SimilarityTransform::from_linear(a, b, t))
}

/// Least-squares similarity (no reflection) mapping `src` onto `dst`.
/// `None` when the source points are coincident.
pub fn fit_similarity(src: &[(f64, f64)], dst: &[(f64, f64)]) -> Option<SimilarityTransform> {
    let n = src.len();
    if n < 2 {
        return None;
    }
    let mean = |pts: &[(f64, f64)]| {
        let (sx, sy) = pts
            .iter()
            .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
        (sx / n as f64, sy / n as f64)
    };
    let ms = mean(src);
    let md = mean(dst);
    let mut num_re = 0.0;
    let mut num_im = 0.0;
    let mut den = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let (zx, zy) = (s.0 - ms.0, s.1 - ms.1);
        let (wx, wy) = (d.0 - md.0, d.1 - md.1);
        // conj(z) * w
        num_re += zx * wx + zy * wy;
        num_im += zx * wy - zy * wx;
        den += zx * zx + zy * zy;
    }
    if den < 1e-9 || (num_re == 0.0 && num_im == 0.0) {
        return None;
    }
    let a = num_re / den;
    let b = num_im / den;
    let t = (md.0 - (a * ms.0 - b * ms.1), md.1 - (b * ms.0 + a * ms.1));
    Some(SimilarityTransform::from_linear(a, b, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, Vector2};

    /// Umeyama closed form via SVD, independent of the complex-number fit.
    fn umeyama(src: &[(f64, f64)], dst: &[(f64, f64)]) -> SimilarityTransform {
        let n = src.len() as f64;
        let to_v = |p: &(f64, f64)| Vector2::new(p.0, p.1);
        let ms = src.iter().map(to_v).sum::<Vector2<f64>>() / n;
        let md = dst.iter().map(to_v).sum::<Vector2<f64>>() / n;
        let mut cov = Matrix2::zeros();
        let mut var = 0.0;
        for (s, d) in src.iter().zip(dst) {
            let zs = to_v(s) - ms;
            let zd = to_v(d) - md;
            cov += zd * zs.transpose();
            var += zs.norm_squared();
        }
        cov /= n;
        var /= n;
        let svd = cov.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut s = Matrix2::identity();
        if (u.determinant() * vt.determinant()) < 0.0 {
            s[(1, 1)] = -1.0;
        }
        let r = u * s * vt;
        let scale = (svd.singular_values[0] * s[(0, 0)] + svd.singular_values[1] * s[(1, 1)]) / var;
        let t = md - scale * r * ms;
        SimilarityTransform::new(r[(1, 0)].atan2(r[(0, 0)]), scale, (t.x, t.y))
    }

    #[test]
    fn three_exact_points_match_umeyama() {
        let truth = SimilarityTransform::new(0.3, 1.2, (4.0, -9.0));
        let src = [(10.0, 20.0), (200.0, 40.0), (90.0, 310.0)];
        let dst: Vec<_> = src.iter().map(|p| truth.apply(*p)).collect();
        let fit = fit_similarity(&src, &dst).unwrap();
        let oracle = umeyama(&src, &dst);
        assert!((fit.rotation - oracle.rotation).abs() < 1e-9);
        assert!((fit.scale - oracle.scale).abs() < 1e-9);
        assert!((fit.translation.0 - oracle.translation.0).abs() < 1e-9);
        assert!((fit.translation.1 - oracle.translation.1).abs() < 1e-9);
        assert!((fit.rotation - 0.3).abs() < 1e-9);
    }

    #[test]
    fn noisy_fit_matches_umeyama() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let truth = SimilarityTransform::new(-0.2, 0.95, (12.0, 3.0));
        let src: Vec<_> = (0..40)
            .map(|_| (rng.random_range(0.0..400.0), rng.random_range(0.0..400.0)))
            .collect();
        let dst: Vec<_> = src
            .iter()
            .map(|p| {
                let q = truth.apply(*p);
                (q.0 + rng.random_range(-1.0..1.0), q.1 + rng.random_range(-1.0..1.0))
            })
            .collect();
        let fit = fit_similarity(&src, &dst).unwrap();
        let oracle = umeyama(&src, &dst);
        assert!((fit.rotation - oracle.rotation).abs() < 1e-9);
        assert!((fit.scale - oracle.scale).abs() < 1e-9);
    }

    #[test]
    fn identity_correspondences() {
        let pts: Vec<_> = (0..10).map(|i| (i as f64 * 13.0, (i * i) as f64)).collect();
        let est = estimate_from_points(&pts, &pts, &ConsensusConfig::default()).unwrap();
        let t = est.transform;
        assert!(t.rotation.abs() < 1e-9);
        assert!((t.scale - 1.0).abs() < 1e-9);
        assert!(t.translation.0.abs() < 1e-9 && t.translation.1.abs() < 1e-9);
        assert_eq!(est.inliers.len(), 10);
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let src = vec![(5.0, 5.0); 6];
        let dst = vec![(7.0, 1.0); 6];
        assert!(matches!(
            estimate_from_points(&src, &dst, &ConsensusConfig::default()),
            Err(RegistrationError::DegenerateGeometry)
        ));
    }

    #[test]
    fn random_correspondences_fail_consensus() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pt = || (rng.random_range(0.0..400.0), rng.random_range(0.0..400.0));
        let src: Vec<_> = (0..60).map(|_| pt()).collect();
        let dst: Vec<_> = (0..60).map(|_| pt()).collect();
        assert!(matches!(
            estimate_from_points(&src, &dst, &ConsensusConfig::default()),
            Err(RegistrationError::ConsensusFailure { .. })
        ));
    }

    #[test]
    fn too_few_matches() {
        assert!(matches!(
            estimate_from_points(&[(0.0, 0.0)], &[(1.0, 1.0)], &ConsensusConfig::default()),
            Err(RegistrationError::NotEnoughMatches { found: 1 })
        ));
    }
}
