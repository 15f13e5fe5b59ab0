//! Straightforward reference implementations and data generators used as test
//! oracles. Nothing here depends on the library under test.

pub mod data;
pub mod linalg;
pub mod scoring;
pub mod slide;

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}
