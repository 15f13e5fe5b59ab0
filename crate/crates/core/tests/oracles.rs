use std::collections::BTreeMap;

use patchclust_core::classify::{accuracy, confusion, f1, precision, recall, Label};
use patchclust_core::clustering::{
    kmeans, kmeans_best_of, representatives, select_k, select_k_with, silhouette_scores, ClusterModel, Init,
    KmeansParams, SelectKParams,
};
use patchclust_core::features::{pca_fit, pca_transform, FeatureMatrix};
use patchclust_testkit::data::{gaussian_blobs, random_instance, random_matrix};
use patchclust_testkit::linalg::{covariance, jacobi_eigen};
use patchclust_testkit::scoring::{cluster_means, nearest_to_centroid, silhouette, tally, within_sse};
use patchclust_testkit::sq_dist;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model_from_labels(features: &FeatureMatrix, points: &[Vec<f64>], labels: &[usize], k: usize) -> ClusterModel {
    let centroids = cluster_means(points, labels, k).into_iter().map(|c| c.unwrap()).collect::<Vec<_>>();
    ClusterModel {
        k,
        objective: within_sse(points, labels, &centroids),
        centroids,
        region_ids: features.region_ids().to_vec(),
        assignments: labels.to_vec(),
        objective_history: vec![],
        iterations: 0,
        converged: true,
        seed: 0,
    }
}

#[test]
fn pca_matches_jacobi_eigensolve() {
    for (n, d, seed) in [(10, 6, 1u64), (50, 20, 2), (10, 6, 3), (50, 20, 4), (30, 12, 5)] {
        let rows = random_matrix(n, d, seed);
        let features = FeatureMatrix::with_generated_ids(&rows).unwrap();
        let model = pca_fit(&features, d.min(n - 1)).unwrap();
        let (values, vectors) = jacobi_eigen(&covariance(&rows));
        for (i, comp) in model.components.iter().enumerate() {
            assert!((model.explained_variance[i] - values[i]).abs() < 1e-9, "{n}x{d} eigenvalue {i}");
            let same: f64 = comp.iter().zip(&vectors[i]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let flipped: f64 = comp.iter().zip(&vectors[i]).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
            assert!(same.min(flipped) < 1e-6, "{n}x{d} component {i}");
        }
        let projected = pca_transform(&model, &features).unwrap();
        let cols: Vec<Vec<f64>> = projected.rows().map(<[f64]>::to_vec).collect();
        let cov = covariance(&cols);
        for i in 0..model.output_dim() {
            assert!((cov[i][i] - values[i]).abs() < 1e-9, "{n}x{d} projected variance {i}");
        }
    }
}

#[test]
fn silhouette_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..20 {
        let n = rng.random_range(12..=300);
        let d = rng.random_range(1..=8);
        let k = rng.random_range(2..=6);
        let (points, labels) = random_instance(n, d, k, 5.0, 100 + case);
        let features = FeatureMatrix::with_generated_ids(&points).unwrap();
        let model = model_from_labels(&features, &points, &labels, k);
        let report = silhouette_scores(&features, &model, None).unwrap();
        let (expected, mean) = silhouette(&points, &labels);
        for (e, x) in report.entries.iter().zip(&expected) {
            assert!((e.score - x).abs() < 1e-9, "case {case}");
        }
        assert!((report.mean_score - mean).abs() < 1e-9, "case {case}");
    }
}

#[test]
fn representatives_match_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..20 {
        let n = rng.random_range(10..200);
        let d = rng.random_range(1..6);
        let k = rng.random_range(2..7);
        // Coarse integer grid so distance ties occur.
        let (points, _) = random_instance(n, d, k, 3.0, case);
        let points: Vec<Vec<f64>> = points.iter().map(|p| p.iter().map(|v| v.round()).collect()).collect();
        let ids: Vec<String> = (0..n).map(|i| format!("s_{}_{}", (i * 7919) % 1000, i)).collect();
        let features = FeatureMatrix::from_rows(ids.clone(), &points).unwrap();
        let model = kmeans(&features, k, case, 300).unwrap();
        let reps = representatives(&features, &model).unwrap();
        let expected = nearest_to_centroid(&points, &ids, &model.assignments, &model.centroids);
        let got: Vec<Option<String>> = reps.per_cluster.iter().map(|r| Some(r.region_id.clone())).collect();
        assert_eq!(got, expected, "case {case}");
    }
}

#[test]
fn kmeans_reaches_a_fixed_point() {
    for case in 0..30u64 {
        let (points, _) = random_instance(60 + case as usize * 5, 3, 4, 10.0, case);
        let features = FeatureMatrix::with_generated_ids(&points).unwrap();
        let k = 2 + (case as usize % 6);
        let model = kmeans_best_of(&features, k, case, 3, &KmeansParams::default()).unwrap();
        assert!(model.converged);
        for w in model.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
        let means = cluster_means(&points, &model.assignments, k);
        for (c, m) in means.iter().enumerate() {
            let m = m.as_ref().expect("no empty cluster at convergence");
            for (a, b) in m.iter().zip(&model.centroids[c]) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        for (p, &a) in points.iter().zip(&model.assignments) {
            let own = sq_dist(p, &model.centroids[a]);
            for c in &model.centroids {
                assert!(own <= sq_dist(p, c) + 1e-9);
            }
        }
        assert!((model.objective - within_sse(&points, &model.assignments, &model.centroids)).abs() < 1e-9);
    }
}

#[test]
fn select_k_recovers_planted_blobs() {
    let plus_plus = SelectKParams {
        kmeans: KmeansParams {
            init: Init::PlusPlus,
            ..KmeansParams::default()
        },
        ..SelectKParams::new(2, 10)
    };
    for planted in [3usize, 5, 8] {
        for seed in 0..10u64 {
            let (points, _) = gaussian_blobs(planted, 30, 0.1, 10.0, 4, seed);
            let features = FeatureMatrix::with_generated_ids(&points).unwrap();
            let sel = select_k_with(&features, seed, &plus_plus).unwrap();
            assert_eq!(sel.best_k, planted, "planted {planted}, seed {seed}: sweep {:?}", sel.sweep);
            if planted <= 5 {
                let sel = select_k(&features, 2, 10, seed, 5).unwrap();
                assert_eq!(sel.best_k, planted, "random init, planted {planted}, seed {seed}");
            }
        }
    }
}

#[test]
fn metrics_match_independent_tally() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..100 {
        let n = rng.random_range(1..80);
        let pairs: Vec<(Option<bool>, bool)> = (0..n)
            .map(|_| {
                let p = match rng.random_range(0..5) {
                    0 => None,
                    1 | 2 => Some(true),
                    _ => Some(false),
                };
                (p, rng.random_bool(0.4))
            })
            .collect();
        let predicted: BTreeMap<String, Label> = pairs
            .iter()
            .enumerate()
            .map(|(i, (p, _))| {
                let l = match p {
                    None => Label::Unlabeled,
                    Some(true) => Label::Positive,
                    Some(false) => Label::Negative,
                };
                (format!("r{i}"), l)
            })
            .collect();
        let truth: BTreeMap<String, bool> = pairs.iter().enumerate().map(|(i, &(_, t))| (format!("r{i}"), t)).collect();
        let c = confusion(&predicted, &truth).unwrap();
        let (tp, tn, fp, fn_, unl) = tally(&pairs);
        assert_eq!((c.counts.tp, c.counts.tn, c.counts.fp, c.counts.fn_, c.unlabeled), (tp, tn, fp, fn_, unl));
        let total = tp + tn + fp + fn_;
        if total > 0 {
            assert_eq!(accuracy(&c.counts).unwrap(), (tp + tn) as f64 / total as f64, "case {case}");
        } else {
            assert!(accuracy(&c.counts).is_err());
        }
        let denom = 2 * tp + fp + fn_;
        let f = f1(&c.counts);
        assert_eq!(f.value, if denom == 0 { 0.0 } else { (2 * tp) as f64 / denom as f64 });
        if let (Some(p), Some(r)) = (precision(&c.counts), recall(&c.counts)) {
            if p + r > 0.0 {
                assert!((f.value - 2.0 * p * r / (p + r)).abs() < 1e-12);
            }
        }
    }
}
