//! Unsupervised patch clustering for tiled slide images.
//!
//! Tiles are segmented into tissue and background, color normalized and cut into
//! square patches. Patch feature vectors are reduced with PCA and clustered with
//! K-means, the number of clusters chosen by mean silhouette. A human labels one
//! representative patch per cluster and the labels propagate to every member,
//! which is scored against annotated regions and rendered as a heatmap.

pub mod classify;
pub mod clustering;
pub mod features;
pub mod pipeline;
pub mod preprocess;

pub use classify::{
    accuracy, apply_labels, build_heatmap, confusion, f1, ground_truth, ClassifyError, Confusion, ConfusionCounts,
    F1Score, HeatmapGrid, Label, LabelMap, RegionLabels, RoiAnnotation, SlideExtent, TruthRule,
};
pub use clustering::{
    derive_seed, kmeans, kmeans_best_of, representatives, select_k, silhouette_scores, ClusterError, ClusterModel,
    Init, KmeansParams, RepresentativeSet, Selection, SilhouetteReport,
};
pub use features::{pca_fit, pca_transform, FeatureError, FeatureMatrix, PcaModel};
pub use pipeline::{Config, MetricsRecord, PipelineError, Run, SlideManifest};
pub use preprocess::{
    compute_color_stats, fit_background_model, reinhard_normalize, segment_foreground, tessellate, ChannelStats,
    ForegroundModel, Mask, PreprocessError, Region, Tile,
};
