//! Run directories, configuration and the stage drivers that connect tiles (or
//! feature files) to clusters, metrics and heatmaps.

mod config;
mod manifest;
mod run;
mod stages;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::classify::ClassifyError;
use crate::clustering::ClusterError;
use crate::features::FeatureError;
use crate::preprocess::PreprocessError;

pub use config::Config;
pub use manifest::{Manifest, SlideManifest, TileRecord};
pub use run::{files, Run, RunLock, SlideInfo};
pub use stages::{
    apply_label_file, evaluate_slide, ingest_features, ingest_stand_in, metrics_table, run_all, run_cluster,
    run_evaluate, run_heatmap, run_pca, run_preprocess, slide_heatmap, stage_seed, AllOptions, ForegroundStatus,
    MetricsRecord, SlideForeground,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{context}: {source}")]
    Preprocess { context: String, source: PreprocessError },
    #[error("slide {slide:?}: {source}")]
    Cluster { slide: String, source: ClusterError },
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("stage `{stage}` has not run: {} is missing", path.display())]
    MissingStage { stage: &'static str, path: PathBuf },
    #[error("unknown slide {0:?}")]
    UnknownSlide(String),
    #[error("no ground truth annotation for slide {0:?}")]
    NoGroundTruth(String),
    #[error("run directory is locked by another process ({})", .0.display())]
    Locked(PathBuf),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

impl PipelineError {
    /// Stable, machine-readable name of the failure class.
    pub fn category(&self) -> &'static str {
        match self {
            PipelineError::Io { .. } => "Io",
            PipelineError::Format { .. } => "Format",
            PipelineError::Preprocess { source, .. } => match source {
                PreprocessError::DegenerateInput(_) => "DegenerateInput",
                PreprocessError::InsufficientForeground { .. } => "InsufficientForeground",
                PreprocessError::InvalidPatchSize { .. } => "InvalidPatchSize",
                _ => "Preprocess",
            },
            PipelineError::Cluster { source, .. } => match source {
                ClusterError::InvalidK { .. } => "InvalidK",
                ClusterError::InvalidRange { .. } => "InvalidRange",
                _ => "Cluster",
            },
            PipelineError::Features(e) => match e {
                FeatureError::Format(_) => "FeatureFormat",
                FeatureError::DimensionMismatch { .. } => "DimensionMismatch",
                _ => "Features",
            },
            PipelineError::Classify(e) => match e {
                ClassifyError::UnknownCluster { .. } => "UnknownCluster",
                ClassifyError::InvalidLabel(_) => "InvalidLabel",
                ClassifyError::EmptyEvaluation => "EmptyEvaluation",
                ClassifyError::Parse { .. } => "Parse",
                _ => "Classify",
            },
            PipelineError::Config(_) => "Config",
            PipelineError::Manifest(_) => "Manifest",
            PipelineError::MissingStage { .. } => "MissingStage",
            PipelineError::UnknownSlide(_) => "UnknownSlide",
            PipelineError::NoGroundTruth(_) => "NoGroundTruth",
            PipelineError::Locked(_) => "Locked",
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_owned(),
        source,
    }
}

pub(crate) fn format_err(path: &Path, message: impl ToString) -> PipelineError {
    PipelineError::Format {
        path: path.to_owned(),
        message: message.to_string(),
    }
}
