use crate::{dist, sq_dist};

/// Per-point silhouette from all pairwise distances, plus the mean.
///
/// `a` is the mean distance to the other members of the point's own cluster,
/// `b` the smallest mean distance to another non-empty cluster. Singletons
/// score 0.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> (Vec<f64>, f64) {
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    let mut scores = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (j, q) in points.iter().enumerate() {
            if i != j {
                sums[labels[j]] += dist(p, q);
                counts[labels[j]] += 1;
            }
        }
        let own = labels[i];
        if counts[own] == 0 {
            scores.push(0.0);
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if !b.is_finite() {
            scores.push(0.0);
            continue;
        }
        let m = a.max(b);
        scores.push(if m == 0.0 { 0.0 } else { (b - a) / m });
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    (scores, mean)
}

/// For each cluster, the id of the member closest to the centroid (ties on the
/// smallest id), found by scanning every member.
pub fn nearest_to_centroid(
    points: &[Vec<f64>],
    ids: &[String],
    labels: &[usize],
    centroids: &[Vec<f64>],
) -> Vec<Option<String>> {
    (0..centroids.len())
        .map(|c| {
            let mut members: Vec<(f64, &String)> = (0..points.len())
                .filter(|&i| labels[i] == c)
                .map(|i| (sq_dist(&points[i], &centroids[c]), &ids[i]))
                .collect();
            members.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
            members.first().map(|(_, id)| (*id).clone())
        })
        .collect()
}

/// Mean of each cluster's members.
pub fn cluster_means(points: &[Vec<f64>], labels: &[usize], k: usize) -> Vec<Option<Vec<f64>>> {
    (0..k)
        .map(|c| {
            let members: Vec<&Vec<f64>> = points.iter().zip(labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                return None;
            }
            let d = members[0].len();
            Some((0..d).map(|j| members.iter().map(|p| p[j]).sum::<f64>() / members.len() as f64).collect())
        })
        .collect()
}

/// Within-cluster sum of squared distances to the given centroids.
pub fn within_sse(points: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points.iter().zip(labels).map(|(p, &l)| sq_dist(p, &centroids[l])).sum()
}

/// Confusion tally over `(predicted, actual)` pairs where `predicted` is
/// `None` for unlabeled. Returns `(tp, tn, fp, fn, unlabeled)`.
pub fn tally(pairs: &[(Option<bool>, bool)]) -> (u64, u64, u64, u64, u64) {
    let mut t = (0, 0, 0, 0, 0);
    for &(p, a) in pairs {
        match (p, a) {
            (None, _) => t.4 += 1,
            (Some(true), true) => t.0 += 1,
            (Some(false), false) => t.1 += 1,
            (Some(true), false) => t.2 += 1,
            (Some(false), true) => t.3 += 1,
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_silhouette() {
        let pts = vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]];
        let (s, mean) = silhouette(&pts, &[0, 0, 1, 1]);
        assert!((s[0] - 9.5 / 10.5).abs() < 1e-15);
        assert!((mean - (9.5 / 10.5 + 8.5 / 9.5) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn tally_counts() {
        let pairs = [(Some(true), true), (Some(true), false), (None, true), (Some(false), true), (Some(false), false)];
        assert_eq!(tally(&pairs), (1, 1, 1, 1, 1));
    }
}
