use serde::{Deserialize, Serialize};

use super::{ClusterError, ClusterModel, Result};
use crate::features::{squared_distance, FeatureMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representative {
    pub cluster: usize,
    pub region_id: String,
    /// Row index in the feature matrix.
    pub index: usize,
    /// Euclidean distance to the centroid.
    pub distance: f64,
}

/// The member nearest to each centroid, ordered by cluster index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeSet {
    pub per_cluster: Vec<Representative>,
}

impl RepresentativeSet {
    pub fn region_for(&self, cluster: usize) -> Option<&str> {
        self.per_cluster
            .get(cluster)
            .map(|r| r.region_id.as_str())
    }
}

/// Ties on distance go to the lexicographically lowest region id.
pub fn representatives(features: &FeatureMatrix, model: &ClusterModel) -> Result<RepresentativeSet> {
    model.check_features(features)?;
    let mut best: Vec<Option<(f64, usize)>> = vec![None; model.k];
    for (i, row) in features.rows().enumerate() {
        let c = model.assignments[i];
        let d = squared_distance(row, &model.centroids[c]);
        let better = match best[c] {
            None => true,
            Some((bd, bi)) => d < bd || (d == bd && model.region_ids[i] < model.region_ids[bi]),
        };
        if better {
            best[c] = Some((d, i));
        }
    }
    let per_cluster = best
        .into_iter()
        .enumerate()
        .map(|(c, b)| {
            let (d, i) = b.ok_or(ClusterError::EmptyCluster(c))?;
            Ok(Representative {
                cluster: c,
                region_id: model.region_ids[i].clone(),
                index: i,
                distance: d.sqrt(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(RepresentativeSet { per_cluster })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(ids: &[&str], assignments: Vec<usize>, centroids: Vec<Vec<f64>>) -> ClusterModel {
        ClusterModel {
            k: centroids.len(),
            centroids,
            region_ids: ids.iter().map(|s| s.to_string()).collect(),
            assignments,
            objective: 0.0,
            objective_history: vec![],
            iterations: 0,
            converged: true,
            seed: 0,
        }
    }

    #[test]
    fn exact_centroid_member() {
        let f = FeatureMatrix::from_rows(
            vec!["a".into(), "b".into(), "c".into()],
            &[vec![0.0], vec![1.0], vec![2.0]],
        )
        .unwrap();
        let r = representatives(&f, &model(&["a", "b", "c"], vec![0, 0, 0], vec![vec![1.0]])).unwrap();
        assert_eq!(r.region_for(0), Some("b"));
        assert_eq!(r.per_cluster[0].distance, 0.0);
    }

    #[test]
    fn tie_breaks_on_region_id() {
        let ids = ["z9", "a1"];
        let f = FeatureMatrix::from_rows(ids.iter().map(|s| s.to_string()).collect(), &[vec![0.0], vec![2.0]]).unwrap();
        let r = representatives(&f, &model(&ids, vec![0, 0], vec![vec![1.0]])).unwrap();
        assert_eq!(r.region_for(0), Some("a1"));
    }

    #[test]
    fn empty_cluster_errors() {
        let f = FeatureMatrix::from_rows(vec!["a".into()], &[vec![0.0]]).unwrap();
        let r = representatives(&f, &model(&["a"], vec![0], vec![vec![0.0], vec![5.0]]));
        assert_eq!(r, Err(ClusterError::EmptyCluster(1)));
    }
}
