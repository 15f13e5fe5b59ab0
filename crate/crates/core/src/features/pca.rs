use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureMatrix, Result};

/// Default number of principal components kept.
pub const DEFAULT_PCA_DIM: usize = 48;
/// Eigenvalues at or below this (relative to `max(1, λ_max)`) count as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `q` rows of length `d`, orthonormal.
    pub components: Vec<Vec<f64>>,
    /// Sample-covariance eigenvalues for each component, descending.
    pub explained_variance: Vec<f64>,
    /// Number of eigenvalues above the rank tolerance.
    pub numerical_rank: usize,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.numerical_rank < self.output_dim()
    }

    pub fn project(&self, row: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(row.iter().zip(&self.mean))
                    .map(|(w, (x, m))| w * (x - m))
                    .sum()
            })
            .collect()
    }

    /// Maps a projected row back to input space.
    pub fn reconstruct(&self, projected: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, &y) in self.components.iter().zip(projected) {
            for (o, w) in out.iter_mut().zip(c) {
                *o += w * y;
            }
        }
        out
    }
}

/// Principal components of the sample covariance (divisor `N - 1`).
///
/// Each component is sign-fixed so its largest-magnitude entry is positive. When
/// fewer than `q` eigenvalues are numerically positive the trailing components
/// are kept as zero-variance directions and a warning is logged.
pub fn pca_fit(features: &FeatureMatrix, q: usize) -> Result<PcaModel> {
    let (n, d) = (features.len(), features.dim());
    if n < 2 {
        return Err(FeatureError::TooFewRows {
            required: 2,
            found: n,
        });
    }
    let max_q = (n - 1).min(d);
    if q == 0 || q > max_q {
        return Err(FeatureError::InvalidDimension { q, max: max_q });
    }

    let mut mean = vec![0.0; d];
    for row in features.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, d, |i, j| features.row(i)[j] - mean[j]);
    let mut cov = centered.tr_mul(&centered) / (n as f64 - 1.0);
    // Symmetrize away rounding asymmetry before the eigensolve.
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let top = eig.eigenvalues[order[0]].max(0.0);
    let tol = RANK_TOLERANCE * top.max(1.0);
    let numerical_rank = order
        .iter()
        .filter(|&&i| eig.eigenvalues[i] > tol)
        .count();

    let mut components = Vec::with_capacity(q);
    let mut explained_variance = Vec::with_capacity(q);
    for &i in &order[..q] {
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let pivot = v
            .iter()
            .enumerate()
            .fold(0, |best, (j, x)| if x.abs() > v[best].abs() { j } else { best });
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        let lambda = eig.eigenvalues[i];
        explained_variance.push(if lambda > tol { lambda } else { 0.0 });
    }
    if numerical_rank < q {
        log::warn!(
            "covariance has numerical rank {numerical_rank} < {q}; padding with zero-variance directions"
        );
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
        numerical_rank,
    })
}

pub fn pca_transform(model: &PcaModel, features: &FeatureMatrix) -> Result<FeatureMatrix> {
    if features.dim() != model.input_dim() {
        return Err(FeatureError::DimensionMismatch {
            expected: model.input_dim(),
            found: features.dim(),
        });
    }
    let mut data = Vec::with_capacity(features.len() * model.output_dim());
    for row in features.rows() {
        data.extend(model.project(row));
    }
    FeatureMatrix::new(features.region_ids().to_vec(), data, model.output_dim())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(seed: u64, n: usize, d: usize) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|j| rng.random_range(-1.0..1.0) * (j + 1) as f64).collect())
            .collect();
        FeatureMatrix::with_generated_ids(&rows).unwrap()
    }

    #[test]
    fn axis_aligned_example() {
        let m = FeatureMatrix::with_generated_ids(&[
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![2.0, 0.0],
            vec![-2.0, 0.0],
        ])
        .unwrap();
        let model = pca_fit(&m, 1).unwrap();
        assert_eq!(model.mean, vec![0.0, 0.0]);
        assert!((model.components[0][0] - 1.0).abs() < 1e-12);
        assert!(model.components[0][1].abs() < 1e-12);
        // (1 + 1 + 4 + 4) / 3
        assert!((model.explained_variance[0] - 10.0 / 3.0).abs() < 1e-12);

        let probe = FeatureMatrix::with_generated_ids(&[vec![3.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let out = pca_transform(&model, &probe).unwrap();
        assert!((out.row(0)[0] - 3.0).abs() < 1e-12);
        assert_eq!(out.row(1), &[0.0]);
        assert_eq!(out.region_ids(), probe.region_ids());
    }

    #[test]
    fn argument_checks() {
        let m = random_matrix(1, 5, 3);
        assert!(matches!(pca_fit(&m, 4), Err(FeatureError::InvalidDimension { q: 4, max: 3 })));
        assert!(matches!(pca_fit(&m, 0), Err(FeatureError::InvalidDimension { .. })));
        assert!(matches!(pca_fit(&m.select(&[0]), 1), Err(FeatureError::TooFewRows { .. })));
        let model = pca_fit(&m, 2).unwrap();
        let wrong = random_matrix(2, 3, 4);
        assert!(matches!(
            pca_transform(&model, &wrong),
            Err(FeatureError::DimensionMismatch { expected: 3, found: 4 })
        ));
    }

    #[test]
    fn rank_deficient_input_pads() {
        // All rows on a line: rank 1 but q = 2 requested.
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64, 0.0]).collect();
        let model = pca_fit(&FeatureMatrix::with_generated_ids(&rows).unwrap(), 2).unwrap();
        assert_eq!(model.numerical_rank, 1);
        assert!(model.is_rank_deficient());
        assert_eq!(model.explained_variance[1], 0.0);
        let dot: f64 = model.components[0].iter().zip(&model.components[1]).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-9);
    }

    #[test]
    fn projection_variances_equal_eigenvalues() {
        let m = random_matrix(5, 30, 6);
        let model = pca_fit(&m, 4).unwrap();
        let y = pca_transform(&model, &m).unwrap();
        for j in 0..4 {
            let mean = y.rows().map(|r| r[j]).sum::<f64>() / 30.0;
            let var = y.rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / 29.0;
            assert!((var - model.explained_variance[j]).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn pca_invariants(seed in any::<u64>(), n in 8usize..20, d in 2usize..7) {
            let m = random_matrix(seed, n, d);
            let total_var: f64 = (0..d)
                .map(|j| {
                    let mu = m.rows().map(|r| r[j]).sum::<f64>() / n as f64;
                    m.rows().map(|r| (r[j] - mu).powi(2)).sum::<f64>() / (n - 1) as f64
                })
                .sum();
            let mut prev_err = f64::INFINITY;
            for q in 1..=d.min(n - 1) {
                let model = pca_fit(&m, q).unwrap();
                // orthonormal rows
                for a in 0..q {
                    for b in 0..q {
                        let dot: f64 = model.components[a].iter().zip(&model.components[b]).map(|(x, y)| x * y).sum();
                        let want = if a == b { 1.0 } else { 0.0 };
                        prop_assert!((dot - want).abs() < 1e-9);
                    }
                }
                // non-negative, non-increasing
                prop_assert!(model.explained_variance.iter().all(|&v| v >= 0.0));
                prop_assert!(model.explained_variance.windows(2).all(|w| w[0] >= w[1]));
                let explained: f64 = model.explained_variance.iter().sum();
                prop_assert!(explained <= total_var + 1e-9);
                if q == d {
                    prop_assert!((explained - total_var).abs() < 1e-9);
                }
                // reconstruction error non-increasing in q
                let err: f64 = m.rows().map(|r| {
                    let rec = model.reconstruct(&model.project(r));
                    r.iter().zip(&rec).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                }).sum();
                prop_assert!(err <= prev_err + 1e-9);
                prev_err = err;
            }
        }

        #[test]
        fn full_rank_projection_preserves_distances(seed in any::<u64>()) {
            let m = random_matrix(seed, 12, 5);
            let model = pca_fit(&m, 5).unwrap();
            let y = pca_transform(&model, &m).unwrap();
            for i in 0..12 {
                for j in 0..12 {
                    let a = crate::features::distance(m.row(i), m.row(j));
                    let b = crate::features::distance(y.row(i), y.row(j));
                    prop_assert!((a - b).abs() < 1e-6);
                }
            }
        }
    }
}
