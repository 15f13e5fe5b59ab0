//! Per-region feature vectors: ingestion, the stand-in extractor, and PCA.

mod extract;
mod io;
mod pca;

use std::collections::HashSet;

use thiserror::Error;

pub use extract::{resize_nearest, stand_in_extract, STAND_IN_DIM};
pub use io::{read_csv, read_features, read_tcf1, write_csv, write_tcf1, TCF1_MAGIC};
pub use pca::{pca_fit, pca_transform, PcaModel, DEFAULT_PCA_DIM, RANK_TOLERANCE};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid output dimension {q}: must satisfy 1 <= q <= min(N - 1, d) = {max}")]
    InvalidDimension { q: usize, max: usize },
    #[error("at least {required} rows are required, got {found}")]
    TooFewRows { required: usize, found: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("duplicate region id {0:?}")]
    DuplicateRegion(String),
    #[error("malformed feature file: {0}")]
    Format(String),
    #[error("invalid patch: {0}")]
    InvalidPatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FeatureError>;

/// N×d row-major matrix of feature vectors, one row per region.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    region_ids: Vec<String>,
    data: Vec<f64>,
    dim: usize,
}

impl FeatureMatrix {
    pub fn new(region_ids: Vec<String>, data: Vec<f64>, dim: usize) -> Result<Self> {
        if data.len() != region_ids.len() * dim {
            return Err(FeatureError::DimensionMismatch {
                expected: region_ids.len() * dim,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let (row, col) = if dim == 0 { (0, 0) } else { (pos / dim, pos % dim) };
            return Err(FeatureError::NonFinite { row, col });
        }
        let mut seen = HashSet::with_capacity(region_ids.len());
        for id in &region_ids {
            if !seen.insert(id.as_str()) {
                return Err(FeatureError::DuplicateRegion(id.clone()));
            }
        }
        Ok(Self {
            region_ids,
            data,
            dim,
        })
    }

    pub fn from_rows(region_ids: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.len() != region_ids.len() {
            return Err(FeatureError::DimensionMismatch {
                expected: region_ids.len(),
                found: rows.len(),
            });
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(FeatureError::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(region_ids, data, dim)
    }

    /// Rows named `r0`, `r1`, ... in order. Handy for ad-hoc data.
    pub fn with_generated_ids(rows: &[Vec<f64>]) -> Result<Self> {
        let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
        Self::from_rows(ids, rows)
    }

    pub fn len(&self) -> usize {
        self.region_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.region_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn region_ids(&self) -> &[String] {
        &self.region_ids
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    pub fn position(&self, region_id: &str) -> Option<usize> {
        self.region_ids.iter().position(|id| id == region_id)
    }

    /// Sub-matrix with the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            region_ids: indices.iter().map(|&i| self.region_ids[i].clone()).collect(),
            data,
            dim: self.dim,
        }
    }
}

/// Squared Euclidean distance.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}
