//! K-means with silhouette-guided choice of K, and per-cluster representatives.

mod kmeans;
mod representatives;
mod select;
mod silhouette;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kmeans::{kmeans, kmeans_best_of, kmeans_with, Init, KmeansParams, DEFAULT_MAX_ITER, DEFAULT_RESTARTS};
pub use representatives::{representatives, Representative, RepresentativeSet};
pub(crate) use select::silhouette_seed;
pub use select::{select_k, select_k_with, SelectKParams, Selection, SweepEntry};
pub use silhouette::{
    silhouette_sampled, silhouette_scores, SilhouetteEntry, SilhouetteReport, DEFAULT_SILHOUETTE_CAP,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("invalid cluster count k={k} for {n} region(s)")]
    InvalidK { k: usize, n: usize },
    #[error("invalid k range {k_min}..={k_max} for {n} region(s)")]
    InvalidRange { k_min: usize, k_max: usize, n: usize },
    #[error("silhouette needs at least two clusters")]
    SingleCluster,
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error("model and features disagree: {0}")]
    FeatureMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, ClusterError>;

/// Outcome of one K-means run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    /// `k` rows of the feature dimension.
    pub centroids: Vec<Vec<f64>>,
    /// Region ids in feature-matrix order.
    pub region_ids: Vec<String>,
    /// Cluster index of each region, aligned with `region_ids`.
    pub assignments: Vec<usize>,
    /// Sum of squared member-to-centroid distances.
    pub objective: f64,
    /// Objective after initialization and after every iteration.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
}

impl ClusterModel {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Row indices of the members of `cluster`, ascending.
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == cluster)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn assignment_of(&self, region_id: &str) -> Option<usize> {
        self.region_ids
            .iter()
            .position(|id| id == region_id)
            .map(|i| self.assignments[i])
    }

    pub(crate) fn check_features(&self, features: &crate::features::FeatureMatrix) -> Result<()> {
        if features.region_ids() != self.region_ids.as_slice() {
            return Err(ClusterError::FeatureMismatch(format!(
                "model covers {} region(s), features have {} (or ids differ)",
                self.region_ids.len(),
                features.len()
            )));
        }
        if let Some(c) = self.centroids.first() {
            if c.len() != features.dim() {
                return Err(ClusterError::FeatureMismatch(format!(
                    "centroid dimension {} vs feature dimension {}",
                    c.len(),
                    features.dim()
                )));
            }
        }
        Ok(())
    }
}

/// Mixes a base seed with a stream tag (SplitMix64 finalizer) so derived
/// seeds are well separated.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
