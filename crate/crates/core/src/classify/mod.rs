//! Few-shot label propagation, ROI ground truth, metrics and heatmaps.

mod heatmap;
mod metrics;
mod roi;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::ClusterModel;

pub use heatmap::{build_heatmap, HeatmapGrid, SlideExtent, DEFAULT_GRID};
pub use metrics::{accuracy, confusion, f1, precision, recall, Confusion, ConfusionCounts, F1Score};
pub use roi::{ground_truth, parse_roi_file, point_in_polygon, RoiAnnotation, TruthRule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("label references cluster {index} but the model has k={k}")]
    UnknownCluster { index: usize, k: usize },
    #[error("invalid label {0:?}: expected positive, negative or unlabeled")]
    InvalidLabel(String),
    #[error("region slide {region_slide:?} does not match annotation slide {roi_slide:?}")]
    SlideMismatch { region_slide: String, roi_slide: String },
    #[error("prediction and truth cover different regions: {0}")]
    KeyMismatch(String),
    #[error("no labeled regions to evaluate")]
    EmptyEvaluation,
    #[error("region center ({x}, {y}) lies outside the slide extent {width}x{height}")]
    OutOfExtent { x: f64, y: f64, width: f64, height: f64 },
    #[error("invalid grid {rows}x{cols}")]
    InvalidGrid { rows: usize, cols: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, ClassifyError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
    Unlabeled,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
            Label::Unlabeled => "unlabeled",
        }
    }

    /// Swaps positive and negative.
    pub fn inverted(self) -> Self {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
            Label::Unlabeled => Label::Unlabeled,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Ok(Label::Positive),
            "negative" => Ok(Label::Negative),
            "unlabeled" => Ok(Label::Unlabeled),
            other => Err(ClassifyError::InvalidLabel(other.to_owned())),
        }
    }
}

/// Per-cluster labels. Clusters without an entry are unlabeled.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    entries: BTreeMap<usize, Label>,
}

impl LabelMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, cluster: usize) -> Label {
        self.entries.get(&cluster).copied().unwrap_or(Label::Unlabeled)
    }

    pub fn set(&mut self, cluster: usize, label: Label) {
        if label == Label::Unlabeled {
            self.entries.remove(&cluster);
        } else {
            self.entries.insert(cluster, label);
        }
    }

    /// Marks exactly `positive` as positive and every other cluster below `k` negative.
    pub fn from_cluster_set(k: usize, positive: &[usize]) -> Self {
        let mut map = Self::new();
        for c in 0..k {
            let label = if positive.contains(&c) {
                Label::Positive
            } else {
                Label::Negative
            };
            map.set(c, label);
        }
        map
    }

    pub fn labeled(&self) -> impl Iterator<Item = (usize, Label)> + '_ {
        self.entries.iter().map(|(&c, &l)| (c, l))
    }

    pub fn positive_clusters(&self) -> Vec<usize> {
        self.labeled()
            .filter(|&(_, l)| l == Label::Positive)
            .map(|(c, _)| c)
            .collect()
    }

    pub fn max_cluster(&self) -> Option<usize> {
        self.entries.keys().next_back().copied()
    }

    pub fn inverted(&self) -> Self {
        Self {
            entries: self.entries.iter().map(|(&c, &l)| (c, l.inverted())).collect(),
        }
    }

    /// Parses `cluster_index,label` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| ClassifyError::Parse { line: i + 1, message };
            let (idx, label) = line
                .split_once(',')
                .ok_or_else(|| parse_err(format!("expected `cluster_index,label`, got {line:?}")))?;
            let idx: usize = idx
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("invalid cluster index {:?}", idx.trim())))?;
            map.set(idx, label.parse()?);
        }
        Ok(map)
    }

    /// Label file text: one `cluster_index,label` line per labeled cluster, ascending.
    pub fn to_file_string(&self) -> String {
        self.labeled().map(|(c, l)| format!("{c},{l}\n")).collect()
    }
}

/// Region id to label.
pub type RegionLabels = BTreeMap<String, Label>;

/// Every region inherits the label of its cluster.
pub fn apply_labels(model: &ClusterModel, labels: &LabelMap) -> Result<RegionLabels> {
    if let Some(index) = labels.max_cluster().filter(|&c| c >= model.k) {
        return Err(ClassifyError::UnknownCluster { index, k: model.k });
    }
    Ok(model
        .region_ids
        .iter()
        .zip(&model.assignments)
        .map(|(id, &c)| (id.clone(), labels.get(c)))
        .collect())
}
