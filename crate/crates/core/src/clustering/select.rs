use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans_best_of, KmeansParams, DEFAULT_RESTARTS};
use super::silhouette::{silhouette_sampled, DEFAULT_SILHOUETTE_CAP};
use super::{derive_seed, ClusterError, ClusterModel, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectKParams {
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub kmeans: KmeansParams,
    pub silhouette_cap: usize,
}

impl SelectKParams {
    pub fn new(k_min: usize, k_max: usize) -> Self {
        Self {
            k_min,
            k_max,
            restarts: DEFAULT_RESTARTS,
            kmeans: KmeansParams::default(),
            silhouette_cap: DEFAULT_SILHOUETTE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub k: usize,
    pub mean_score: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub best_k: usize,
    pub sweep: Vec<SweepEntry>,
    /// The best-of-restarts model at `best_k`.
    pub model: ClusterModel,
}

impl Selection {
    /// Two-column `k,mean_score` table.
    pub fn sweep_table(&self) -> String {
        let mut out = String::from("k,mean_score\n");
        for e in &self.sweep {
            out.push_str(&format!("{},{}\n", e.k, e.mean_score));
        }
        out
    }
}

/// Seed stream for the K-means fit at a given `k`.
pub(crate) fn kmeans_seed(seed: u64, k: usize) -> u64 {
    derive_seed(seed, 0x4b00_0000 + k as u64)
}

/// Seed stream for the silhouette subsample at a given `k`.
pub(crate) fn silhouette_seed(seed: u64, k: usize) -> u64 {
    derive_seed(seed, 0x5300_0000 + k as u64)
}

pub fn select_k(
    features: &FeatureMatrix,
    k_min: usize,
    k_max: usize,
    seed: u64,
    restarts: usize,
) -> Result<Selection> {
    select_k_with(
        features,
        seed,
        &SelectKParams {
            restarts,
            ..SelectKParams::new(k_min, k_max)
        },
    )
}

/// Sweeps `k_min..=k_max`, fitting best-of-restarts K-means at each `k` and
/// keeping the `k` with the highest mean silhouette (smaller `k` on ties).
pub fn select_k_with(features: &FeatureMatrix, seed: u64, params: &SelectKParams) -> Result<Selection> {
    let n = features.len();
    if params.k_min < 2 || params.k_min > params.k_max || params.k_max > n {
        return Err(ClusterError::InvalidRange {
            k_min: params.k_min,
            k_max: params.k_max,
            n,
        });
    }
    let mut sweep = Vec::new();
    let mut best: Option<(f64, ClusterModel)> = None;
    for k in params.k_min..=params.k_max {
        let model = kmeans_best_of(features, k, kmeans_seed(seed, k), params.restarts, &params.kmeans)?;
        let report = silhouette_sampled(features, &model, params.silhouette_cap, silhouette_seed(seed, k))?;
        log::debug!("k={k}: mean silhouette {:.6}, objective {:.6}", report.mean_score, model.objective);
        sweep.push(SweepEntry {
            k,
            mean_score: report.mean_score,
            objective: model.objective,
        });
        if best.as_ref().is_none_or(|(s, _)| report.mean_score > *s) {
            best = Some((report.mean_score, model));
        }
    }
    let (_, model) = best.expect("non-empty k range");
    Ok(Selection {
        best_k: model.k,
        sweep,
        model,
    })
}
