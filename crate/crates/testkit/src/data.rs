use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Isotropic Gaussian blobs with `per_blob` points each. Centers sit on the
/// axes of a `dim`-dimensional space (dim >= k is not required) at mutual
/// distance at least `spacing`. Returns points in blob order with labels.
pub fn gaussian_blobs(k: usize, per_blob: usize, sigma: f64, spacing: f64, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("valid sigma");
    let centers = blob_centers(k, spacing, dim);
    let mut points = Vec::with_capacity(k * per_blob);
    let mut labels = Vec::with_capacity(k * per_blob);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_blob {
            points.push(center.iter().map(|&m| m + noise.sample(&mut rng)).collect());
            labels.push(c);
        }
    }
    (points, labels)
}

/// Centers on a line along the first axis, then spread over the remaining
/// axes when `dim > 1`, each pair at least `spacing` apart.
pub fn blob_centers(k: usize, spacing: f64, dim: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|c| {
            let mut v = vec![0.0; dim];
            if dim == 1 {
                v[0] = c as f64 * spacing;
            } else {
                // Alternate between two axes to keep the layout compact.
                v[c % dim] = (c / dim + 1) as f64 * spacing;
            }
            v
        })
        .collect()
}

/// Uniform random points in `[-range, range]^dim` with random labels in
/// `0..k`, every label used at least once.
pub fn random_instance(n: usize, dim: usize, k: usize, range: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-range..range)).collect())
        .collect();
    let mut labels: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    (points, labels)
}

/// Random `rows`×`cols` matrix with correlated columns.
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mix: Vec<Vec<f64>> = (0..cols).map(|_| (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    (0..rows)
        .map(|_| {
            let z: Vec<f64> = (0..cols).map(|j| rng.random_range(-1.0..1.0) * (j + 1) as f64).collect();
            (0..cols).map(|j| (0..cols).map(|i| z[i] * mix[i][j]).sum()).collect()
        })
        .collect()
}
