use super::{FeatureError, Result};

/// Length of the stand-in feature vector.
pub const STAND_IN_DIM: usize = 64;

/// Nearest-neighbor resampling of a square RGB patch. Output pixel `(i, j)`
/// copies input pixel `(i * size / out_size, j * size / out_size)`.
pub fn resize_nearest(patch: &[u8], size: u32, out_size: u32) -> Result<Vec<u8>> {
    check_patch(patch, size)?;
    if out_size == 0 {
        return Err(FeatureError::InvalidPatch("output size must be positive".into()));
    }
    let (size, out) = (size as usize, out_size as usize);
    let mut resized = Vec::with_capacity(out * out * 3);
    for i in 0..out {
        let si = i * size / out;
        for j in 0..out {
            let sj = j * size / out;
            let p = (si * size + sj) * 3;
            resized.extend_from_slice(&patch[p..p + 3]);
        }
    }
    Ok(resized)
}

fn check_patch(patch: &[u8], size: u32) -> Result<()> {
    if size == 0 {
        return Err(FeatureError::InvalidPatch("patch size must be positive".into()));
    }
    let expected = size as usize * size as usize * 3;
    if patch.len() != expected {
        return Err(FeatureError::InvalidPatch(format!(
            "expected {expected} bytes for a {size}x{size}x3 patch, got {}",
            patch.len()
        )));
    }
    Ok(())
}

/// Deterministic hand-crafted descriptor standing in for a conv-net embedding.
///
/// Layout (64 entries):
/// * `0..48`: mean R, G, B of each cell of a 4×4 grid, cells row-major
/// * `48..60`: per channel R, G, B: standard deviation, 25th, 50th, 75th percentile
/// * `60..64`: grayscale standard deviation of each 2×2 quadrant, row-major
pub fn stand_in_extract(patch: &[u8], size: u32) -> Result<Vec<f64>> {
    check_patch(patch, size)?;
    if size < 4 {
        return Err(FeatureError::InvalidPatch(format!(
            "stand-in extractor needs patches of at least 4x4, got {size}x{size}"
        )));
    }
    let s = size as usize;
    let px = |x: usize, y: usize| {
        let i = (y * s + x) * 3;
        [patch[i], patch[i + 1], patch[i + 2]]
    };
    let bounds = |cells: usize, c: usize| (c * s / cells, (c + 1) * s / cells);

    let mut out = Vec::with_capacity(STAND_IN_DIM);
    for cy in 0..4 {
        let (y0, y1) = bounds(4, cy);
        for cx in 0..4 {
            let (x0, x1) = bounds(4, cx);
            let mut sum = [0u64; 3];
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = px(x, y);
                    for c in 0..3 {
                        sum[c] += p[c] as u64;
                    }
                }
            }
            let n = ((y1 - y0) * (x1 - x0)) as f64;
            out.extend(sum.iter().map(|&v| v as f64 / n));
        }
    }

    let n = (s * s) as u64;
    for c in 0..3 {
        let mut hist = [0u64; 256];
        for p in patch.chunks_exact(3) {
            hist[p[c] as usize] += 1;
        }
        let mean = hist.iter().enumerate().map(|(v, &k)| v as f64 * k as f64).sum::<f64>() / n as f64;
        let var = hist
            .iter()
            .enumerate()
            .map(|(v, &k)| (v as f64 - mean).powi(2) * k as f64)
            .sum::<f64>()
            / n as f64;
        out.push(var.sqrt());
        for q in [0.25, 0.5, 0.75] {
            out.push(histogram_quantile(&hist, n, q));
        }
    }

    for qy in 0..2 {
        let (y0, y1) = bounds(2, qy);
        for qx in 0..2 {
            let (x0, x1) = bounds(2, qx);
            let grays: Vec<f64> = (y0..y1)
                .flat_map(|y| (x0..x1).map(move |x| (x, y)))
                .map(|(x, y)| crate::preprocess::grayscale(px(x, y)))
                .collect();
            let m = grays.iter().sum::<f64>() / grays.len() as f64;
            let v = grays.iter().map(|g| (g - m).powi(2)).sum::<f64>() / grays.len() as f64;
            out.push(v.sqrt());
        }
    }
    debug_assert_eq!(out.len(), STAND_IN_DIM);
    Ok(out)
}

/// Nearest-rank quantile: the value at sorted position `round(q * (n - 1))`.
fn histogram_quantile(hist: &[u64; 256], n: u64, q: f64) -> f64 {
    let rank = (q * (n - 1) as f64).round() as u64;
    let mut seen = 0;
    for (v, &k) in hist.iter().enumerate() {
        seen += k;
        if seen > rank {
            return v as f64;
        }
    }
    255.0
}
