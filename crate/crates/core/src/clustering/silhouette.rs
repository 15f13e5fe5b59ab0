use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ClusterError, ClusterModel, Result};
use crate::features::{distance, FeatureMatrix};

/// Regions scored before switching to a uniform subsample.
pub const DEFAULT_SILHOUETTE_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteEntry {
    pub region_id: String,
    pub cluster: usize,
    /// Mean distance to the other members of the own cluster.
    pub intra: f64,
    /// Smallest mean distance to the members of another cluster.
    pub nearest: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteReport {
    pub entries: Vec<SilhouetteEntry>,
    pub mean_score: f64,
    pub sample_ids: Vec<String>,
}

/// Silhouette of every region in `sample` (all regions when `None`), with the
/// intra and nearest-cluster means taken over the sampled population only.
///
/// Members of clusters with a single sampled member score 0.
pub fn silhouette_scores(
    features: &FeatureMatrix,
    model: &ClusterModel,
    sample: Option<&[usize]>,
) -> Result<SilhouetteReport> {
    if model.k < 2 {
        return Err(ClusterError::SingleCluster);
    }
    model.check_features(features)?;
    let all: Vec<usize>;
    let sample = match sample {
        Some(s) => {
            if let Some(&bad) = s.iter().find(|&&i| i >= features.len()) {
                return Err(ClusterError::InvalidParameter(format!(
                    "sample index {bad} out of range for {} region(s)",
                    features.len()
                )));
            }
            s
        }
        None => {
            all = (0..features.len()).collect();
            &all
        }
    };
    if sample.is_empty() {
        return Err(ClusterError::InvalidParameter("empty silhouette sample".into()));
    }

    let k = model.k;
    let mut counts = vec![0usize; k];
    for &i in sample {
        counts[model.assignments[i]] += 1;
    }

    let entries: Vec<SilhouetteEntry> = sample
        .par_iter()
        .map(|&i| {
            let own = model.assignments[i];
            let x = features.row(i);
            let mut sums = vec![0.0; k];
            for &j in sample {
                if j != i {
                    sums[model.assignments[j]] += distance(x, features.row(j));
                }
            }
            let mut entry = SilhouetteEntry {
                region_id: model.region_ids[i].clone(),
                cluster: own,
                intra: 0.0,
                nearest: 0.0,
                score: 0.0,
            };
            if counts[own] < 2 {
                return entry;
            }
            let nearest = (0..k)
                .filter(|&z| z != own && counts[z] > 0)
                .map(|z| sums[z] / counts[z] as f64)
                .min_by(f64::total_cmp);
            let Some(nearest) = nearest else {
                return entry;
            };
            entry.intra = sums[own] / (counts[own] - 1) as f64;
            entry.nearest = nearest;
            let denom = entry.intra.max(nearest);
            if denom > 0.0 {
                entry.score = (nearest - entry.intra) / denom;
            }
            entry
        })
        .collect();

    let mean_score = entries.iter().map(|e| e.score).sum::<f64>() / entries.len() as f64;
    Ok(SilhouetteReport {
        sample_ids: entries.iter().map(|e| e.region_id.clone()).collect(),
        entries,
        mean_score,
    })
}

/// Scores every region when `N <= cap`, otherwise a seeded uniform subsample of
/// `cap` regions (in ascending row order).
pub fn silhouette_sampled(
    features: &FeatureMatrix,
    model: &ClusterModel,
    cap: usize,
    seed: u64,
) -> Result<SilhouetteReport> {
    if cap == 0 {
        return Err(ClusterError::InvalidParameter("silhouette cap must be >= 1".into()));
    }
    if features.len() <= cap {
        return silhouette_scores(features, model, None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, features.len(), cap).into_vec();
    picked.sort_unstable();
    silhouette_scores(features, model, Some(&picked))
}
