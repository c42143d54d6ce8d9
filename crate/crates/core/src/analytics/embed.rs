use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::scoring::DistanceMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPoint {
    pub coin_name: String,
    pub x: f64,
    pub y: f64,
}

/// Classical multidimensional scaling onto the plane.
///
/// Squared distances are double-centered and the two leading eigenpairs give
/// the coordinates. Negative eigenvalues (non-Euclidean input) are clamped to
/// zero. Each axis is oriented so the first coin with a non-zero coordinate on
/// it has a positive value.
pub fn embed_2d(matrix: &DistanceMatrix) -> Vec<EmbeddingPoint> {
    let n = matrix.n_coins();
    let names = matrix.coin_names();
    let at_origin = || {
        names
            .iter()
            .map(|name| EmbeddingPoint {
                coin_name: name.clone(),
                x: 0.0,
                y: 0.0,
            })
            .collect()
    };
    if n < 2 {
        return at_origin();
    }

    let d2 = DMatrix::from_fn(n, n, |i, j| matrix.distance(i, j).powi(2));
    let row_means: Vec<f64> = (0..n).map(|i| d2.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (d2[(i, j)] - row_means[i] - row_means[j] + grand));
    let eig = SymmetricEigen::new(b);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return at_origin();
    }
    let eps = 1e-12 * scale.sqrt().max(1.0);

    let axis = |k: usize| -> Vec<f64> {
        let Some(&idx) = order.get(k) else {
            return vec![0.0; n];
        };
        // Eigenvalues at rounding level are treated as zero.
        let lambda = eig.eigenvalues[idx];
        let lambda = if lambda > 1e-10 * scale { lambda } else { 0.0 };
        let root = lambda.sqrt();
        let mut coords: Vec<f64> = eig.eigenvectors.column(idx).iter().map(|v| v * root).collect();
        if let Some(first) = coords.iter().find(|c| c.abs() > eps) {
            if *first < 0.0 {
                coords.iter_mut().for_each(|c| *c = -*c);
            }
        }
        coords.iter().map(|&c| if c == 0.0 { 0.0 } else { c }).collect()
    };
    let xs = axis(0);
    let ys = axis(1);
    names
        .iter()
        .enumerate()
        .map(|(i, name)| EmbeddingPoint {
            coin_name: name.clone(),
            x: xs[i],
            y: ys[i],
        })
        .collect()
}
