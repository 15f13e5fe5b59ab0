use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{format_err, io_err, PipelineError, Result};
use crate::classify::{TruthRule, DEFAULT_GRID};
use crate::clustering::{Init, KmeansParams, SelectKParams, DEFAULT_MAX_ITER, DEFAULT_RESTARTS, DEFAULT_SILHOUETTE_CAP};
use crate::features::DEFAULT_PCA_DIM;
use crate::preprocess::{DEFAULT_MIN_FOREGROUND, DEFAULT_PATCH_SIZE, DEFAULT_TILE_SIZE};

/// Every tunable of a run. Serialized as TOML; missing keys take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub patch_size: u32,
    pub tile_size: u32,
    pub min_foreground: f64,
    /// Pixels drawn per slide for the background mixture fit.
    pub gmm_sample: usize,
    /// Minimum gap between the two mixture means (gray levels) for a slide to
    /// count as containing tissue.
    pub min_contrast: f64,
    /// Normalization target statistics file. When absent, the foreground
    /// statistics of the first tile with tissue are the target.
    pub target: Option<PathBuf>,
    pub pca_dim: usize,
    /// Fixed cluster count. When absent, K is chosen from `k_min..=k_max`.
    pub k: Option<usize>,
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub init: Init,
    pub silhouette_sample: usize,
    pub grid: usize,
    pub truth_rule: TruthRule,
    /// Only annotations with this label count as positive truth.
    pub roi_label: Option<String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            patch_size: DEFAULT_PATCH_SIZE,
            tile_size: DEFAULT_TILE_SIZE,
            min_foreground: DEFAULT_MIN_FOREGROUND,
            gmm_sample: 200_000,
            min_contrast: 20.0,
            target: None,
            pca_dim: DEFAULT_PCA_DIM,
            k: None,
            k_min: 2,
            k_max: 30,
            restarts: DEFAULT_RESTARTS,
            max_iter: DEFAULT_MAX_ITER,
            init: Init::Random,
            silhouette_sample: DEFAULT_SILHOUETTE_CAP,
            grid: DEFAULT_GRID,
            truth_rule: TruthRule::Center,
            roi_label: None,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text).map_err(|e| match e {
            PipelineError::Config(m) => format_err(path, m),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(PipelineError::Config(m));
        if self.patch_size == 0 || self.tile_size == 0 {
            return fail("patch_size and tile_size must be positive".into());
        }
        if !self.tile_size.is_multiple_of(self.patch_size) {
            return fail(format!(
                "tile_size {} is not a multiple of patch_size {}",
                self.tile_size, self.patch_size
            ));
        }
        if !(0.0..=1.0).contains(&self.min_foreground) {
            return fail(format!("min_foreground {} outside [0, 1]", self.min_foreground));
        }
        if self.gmm_sample < 2 {
            return fail("gmm_sample must be at least 2".into());
        }
        if self.min_contrast.is_nan() || self.min_contrast < 0.0 {
            return fail("min_contrast must be non-negative".into());
        }
        if self.pca_dim == 0 {
            return fail("pca_dim must be positive".into());
        }
        match self.k {
            Some(0) => return fail("k must be positive".into()),
            Some(_) => {}
            None if self.k_min < 2 || self.k_min > self.k_max => {
                return fail(format!("k range {}..={} is invalid (need 2 <= k_min <= k_max)", self.k_min, self.k_max));
            }
            None => {}
        }
        if self.restarts == 0 || self.max_iter == 0 {
            return fail("restarts and max_iter must be positive".into());
        }
        if self.silhouette_sample == 0 || self.grid == 0 {
            return fail("silhouette_sample and grid must be positive".into());
        }
        Ok(())
    }

    pub fn kmeans_params(&self) -> KmeansParams {
        KmeansParams {
            max_iter: self.max_iter,
            init: self.init,
        }
    }

    pub fn select_params(&self, k_max: usize) -> SelectKParams {
        SelectKParams {
            k_min: self.k_min,
            k_max,
            restarts: self.restarts,
            kmeans: self.kmeans_params(),
            silhouette_cap: self.silhouette_sample,
        }
    }
}
