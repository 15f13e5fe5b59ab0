use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, ClusterError, ClusterModel, Result};
use crate::features::{squared_distance, FeatureMatrix};

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_RESTARTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// `k` distinct data points drawn uniformly.
    #[default]
    Random,
    /// D²-weighted seeding.
    PlusPlus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmeansParams {
    pub max_iter: usize,
    pub init: Init,
}

impl Default for KmeansParams {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            init: Init::Random,
        }
    }
}

/// Lloyd's algorithm with uniform random initialization.
pub fn kmeans(features: &FeatureMatrix, k: usize, seed: u64, max_iter: usize) -> Result<ClusterModel> {
    kmeans_with(
        features,
        k,
        seed,
        &KmeansParams {
            max_iter,
            ..Default::default()
        },
    )
}

pub fn kmeans_with(features: &FeatureMatrix, k: usize, seed: u64, params: &KmeansParams) -> Result<ClusterModel> {
    let n = features.len();
    if k == 0 || k > n {
        return Err(ClusterError::InvalidK { k, n });
    }
    if params.max_iter == 0 {
        return Err(ClusterError::InvalidParameter("max_iter must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = match params.init {
        Init::Random => index::sample(&mut rng, n, k)
            .into_iter()
            .map(|i| features.row(i).to_vec())
            .collect(),
        Init::PlusPlus => plus_plus(features, k, &mut rng),
    };

    let mut assignments = assign(features, &centroids);
    let mut history = vec![objective(features, &centroids, &assignments)];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iter {
        iterations += 1;
        centroids = update_centroids(features, &mut assignments, k);
        let next = assign(features, &centroids);
        let j = objective(features, &centroids, &next);
        let prev = *history.last().unwrap();
        assert!(
            j <= prev + 1e-12 * prev.abs().max(1.0),
            "k-means objective increased from {prev} to {j} at iteration {iterations}"
        );
        history.push(j);
        let changed = next != assignments;
        assignments = next;
        if !changed {
            converged = true;
            break;
        }
    }
    if !converged {
        // Leave every centroid at its members' mean even when stopped early.
        centroids = update_centroids(features, &mut assignments, k);
        let j = objective(features, &centroids, &assignments);
        history.push(j);
    }

    Ok(ClusterModel {
        k,
        objective: objective(features, &centroids, &assignments),
        centroids,
        region_ids: features.region_ids().to_vec(),
        assignments,
        objective_history: history,
        iterations,
        converged,
        seed,
    })
}

/// Runs `restarts` independent K-means fits and keeps the lowest objective
/// (earliest restart on ties).
pub fn kmeans_best_of(
    features: &FeatureMatrix,
    k: usize,
    seed: u64,
    restarts: usize,
    params: &KmeansParams,
) -> Result<ClusterModel> {
    if restarts == 0 {
        return Err(ClusterError::InvalidParameter("restarts must be >= 1".into()));
    }
    let mut best: Option<ClusterModel> = None;
    for r in 0..restarts {
        let model = kmeans_with(features, k, derive_seed(seed, r as u64), params)?;
        if best.as_ref().is_none_or(|b| model.objective < b.objective) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn plus_plus(features: &FeatureMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = features.len();
    let mut centroids = vec![features.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = features
        .rows()
        .map(|r| squared_distance(r, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = features.row(pick).to_vec();
        for (d, r) in d2.iter_mut().zip(features.rows()) {
            *d = d.min(squared_distance(r, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Nearest centroid per row; ties go to the lowest cluster index.
pub(crate) fn assign(features: &FeatureMatrix, centroids: &[Vec<f64>]) -> Vec<usize> {
    (0..features.len())
        .into_par_iter()
        .map(|i| nearest(features.row(i), centroids))
        .collect()
}

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_distance(row, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

pub(crate) fn objective(features: &FeatureMatrix, centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    features
        .rows()
        .zip(assignments)
        .map(|(r, &a)| squared_distance(r, &centroids[a]))
        .sum()
}

fn means(features: &FeatureMatrix, assignments: &[usize], k: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut sums = vec![vec![0.0; features.dim()]; k];
    let mut counts = vec![0usize; k];
    for (r, &a) in features.rows().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(r) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    (sums, counts)
}

/// Member means. Each empty cluster takes over the point farthest from its
/// current centroid (among clusters that can spare a member), after which the
/// means are recomputed.
fn update_centroids(features: &FeatureMatrix, assignments: &mut [usize], k: usize) -> Vec<Vec<f64>> {
    let (mut centroids, mut counts) = means(features, assignments, k);
    if counts.iter().all(|&c| c > 0) {
        return centroids;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let mut far: Option<(usize, f64)> = None;
        for (i, r) in features.rows().enumerate() {
            let a = assignments[i];
            if counts[a] < 2 {
                continue;
            }
            let d = squared_distance(r, &centroids[a]);
            if far.is_none_or(|(_, fd)| d > fd) {
                far = Some((i, d));
            }
        }
        let (i, _) = far.expect("k <= N guarantees a cluster with a spare member");
        counts[assignments[i]] -= 1;
        assignments[i] = empty;
        counts[empty] = 1;
        centroids[empty] = features.row(i).to_vec();
    }
    means(features, assignments, k).0
}
