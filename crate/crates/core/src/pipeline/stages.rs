use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::{read_toml, remove_if_exists, write_atomic, write_json};
use super::{files, format_err, io_err, Config, Manifest, PipelineError, Result, Run, SlideInfo, SlideManifest};
use crate::classify::{
    accuracy, apply_labels, build_heatmap, confusion, f1, ground_truth, parse_roi_file, ClassifyError,
    ConfusionCounts, HeatmapGrid, LabelMap, RoiAnnotation,
};
use crate::clustering::{
    derive_seed, kmeans_best_of, representatives, select_k_with, silhouette_sampled, silhouette_seed, ClusterError,
    ClusterModel,
};
use crate::features::{
    pca_fit, pca_transform, read_features, stand_in_extract, write_tcf1, FeatureError, FeatureMatrix, PcaModel,
};
use crate::preprocess::{
    compute_color_stats, fit_background_model, grayscale, reinhard_normalize, segment_foreground, tessellate,
    ChannelStats, ForegroundModel, Mask, PreprocessError, Region, Tile, DEFAULT_EM_MAX_ITER, DEFAULT_EM_TOL,
};

/// Seed stream offsets. Each stage draws from `derive_seed(seed, offset)`,
/// further split per slide by the slide's position in sorted order.
const FOREGROUND_STREAM: u64 = 1;
const CLUSTER_STREAM: u64 = 3;

/// Seed for one slide within one stage stream.
pub fn stage_seed(seed: u64, stream: u64, slide_index: usize) -> u64 {
    derive_seed(derive_seed(seed, stream), slide_index as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForegroundStatus {
    Tissue,
    /// All sampled pixels identical, so no two-component fit exists.
    Degenerate,
    /// The fitted components are closer than `min_contrast`.
    LowContrast,
}

/// Background model of one slide as recorded in `foreground.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlideForeground {
    pub slide_id: String,
    pub status: ForegroundStatus,
    pub model: Option<ForegroundModel>,
    pub sampled_pixels: usize,
    pub foreground_pixels: usize,
}

/// One row of the evaluation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub slide_id: String,
    pub k: usize,
    /// Clusters labeled positive.
    pub cluster_set: Vec<usize>,
    pub accuracy: f64,
    pub f1: f64,
    pub f1_degenerate: bool,
    pub confusion: ConfusionCounts,
    pub unlabeled: u64,
}

fn preprocess_err(context: String) -> impl FnOnce(PreprocessError) -> PipelineError {
    move |source| PipelineError::Preprocess { context, source }
}

fn cluster_err(slide: &str) -> impl FnOnce(ClusterError) -> PipelineError + '_ {
    move |source| PipelineError::Cluster {
        slide: slide.to_owned(),
        source,
    }
}

fn load_tile(slide: &SlideManifest, index: usize, config: &Config) -> Result<Tile> {
    let record = &slide.tiles[index];
    let path = slide.tile_path(record);
    let img = image::open(&path).map_err(|e| match e {
        image::ImageError::IoError(source) => PipelineError::Io { path: path.clone(), source },
        other => format_err(&path, other),
    })?;
    let tile = Tile::from_rgb_image(&slide.slide_id, record.x, record.y, img.to_rgb8())
        .map_err(preprocess_err(format!("{}", path.display())))?;
    if tile.width() > config.tile_size || tile.height() > config.tile_size {
        return Err(format_err(
            &path,
            format!(
                "tile is {}x{}, larger than tile_size {}",
                tile.width(),
                tile.height(),
                config.tile_size
            ),
        ));
    }
    Ok(tile)
}

/// Fits the background mixture on a seeded subsample of the slide's pixels.
fn fit_foreground(slide_id: &str, tiles: &[Tile], config: &Config, seed: u64) -> Result<SlideForeground> {
    let offsets: Vec<usize> = tiles
        .iter()
        .scan(0usize, |acc, t| {
            let start = *acc;
            *acc += t.pixel_count();
            Some(start)
        })
        .collect();
    let total: usize = tiles.iter().map(Tile::pixel_count).sum();
    let gray_at = |i: usize| {
        let t = offsets.partition_point(|&o| o <= i) - 1;
        let p = (i - offsets[t]) * 3;
        let px = &tiles[t].pixels()[p..p + 3];
        grayscale([px[0], px[1], px[2]])
    };
    let samples: Vec<f64> = if total <= config.gmm_sample {
        (0..total).map(gray_at).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picks = index::sample(&mut rng, total, config.gmm_sample).into_vec();
        picks.sort_unstable();
        picks.into_iter().map(gray_at).collect()
    };

    let (status, model) = match fit_background_model(&samples, DEFAULT_EM_MAX_ITER, DEFAULT_EM_TOL) {
        Err(PreprocessError::DegenerateInput(_)) => (ForegroundStatus::Degenerate, None),
        Err(e) => return Err(preprocess_err(format!("slide {slide_id:?}"))(e)),
        Ok(m) if m.mean_1 - m.mean_0 < config.min_contrast => (ForegroundStatus::LowContrast, None),
        Ok(m) => (ForegroundStatus::Tissue, Some(m)),
    };
    if status != ForegroundStatus::Tissue {
        log::warn!("slide {slide_id:?}: no tissue found ({status:?}), slide yields no regions");
    }
    Ok(SlideForeground {
        slide_id: slide_id.to_owned(),
        status,
        model,
        sampled_pixels: samples.len(),
        foreground_pixels: 0,
    })
}

fn normalize_and_tessellate(tile: &Tile, mask: &Mask, target: &ChannelStats, config: &Config) -> Result<Vec<Region>> {
    let context = || format!("slide {:?}, tile ({}, {})", tile.slide_id, tile.tile_x, tile.tile_y);
    if mask.count() < 2 {
        return Ok(Vec::new());
    }
    let out = reinhard_normalize(tile, mask, target).map_err(preprocess_err(context()))?;
    if out.is_degenerate() {
        log::warn!("{}: constant color channel, normalized by shift only", context());
    }
    tessellate(&out.tile, mask, config.patch_size, config.min_foreground).map_err(preprocess_err(context()))
}

fn load_target(path: &Path) -> Result<ChannelStats> {
    let stats: ChannelStats = read_toml(path, "target")?;
    stats.validate().map_err(|e| format_err(path, e))?;
    Ok(stats)
}

/// Segments, normalizes and tessellates every tile of every slide, writing the
/// region list and patch store per slide.
pub fn run_preprocess(run: &Run, manifest: &Manifest, config: &Config) -> Result<Vec<SlideInfo>> {
    manifest.validate()?;
    let mut slides: Vec<&SlideManifest> = manifest.slides.iter().collect();
    slides.sort_by(|a, b| a.slide_id.cmp(&b.slide_id));
    write_atomic(&run.path(files::MANIFEST), manifest.to_toml().as_bytes())?;

    let mut target = match &config.target {
        Some(path) => Some(load_target(path)?),
        None => None,
    };
    if let Some(t) = &target {
        write_target(run, t)?;
    }

    let mut infos = Vec::new();
    for (slide_index, slide) in slides.into_iter().enumerate() {
        let tiles: Vec<Tile> = (0..slide.tiles.len())
            .into_par_iter()
            .map(|i| load_tile(slide, i, config))
            .collect::<Result<_>>()?;
        let mut fg = fit_foreground(
            &slide.slide_id,
            &tiles,
            config,
            stage_seed(config.seed, FOREGROUND_STREAM, slide_index),
        )?;
        let masks: Vec<Mask> = match &fg.model {
            Some(m) => tiles.par_iter().map(|t| segment_foreground(t, m)).collect(),
            None => tiles.iter().map(|t| Mask::filled(t.width(), t.height(), false)).collect(),
        };
        fg.foreground_pixels = masks.iter().map(Mask::count).sum();

        // Self mode: the first tile (in slide, then manifest order) with foreground.
        if target.is_none() {
            if let Some((tile, mask)) = tiles.iter().zip(&masks).find(|(_, m)| m.count() >= 2) {
                let t = compute_color_stats(tile, mask).map_err(preprocess_err(format!(
                    "self-normalization target from slide {:?}, tile ({}, {})",
                    slide.slide_id, tile.tile_x, tile.tile_y
                )))?;
                write_target(run, &t)?;
                target = Some(t);
            }
        }

        let per_tile: Vec<Vec<Region>> = tiles
            .par_iter()
            .zip(&masks)
            .map(|(tile, mask)| match &target {
                Some(t) => normalize_and_tessellate(tile, mask, t, config),
                None => Ok(Vec::new()),
            })
            .collect::<Result<_>>()?;
        let regions: Vec<Region> = per_tile.into_iter().flatten().collect();
        if regions.is_empty() {
            log::warn!("slide {:?}: 0 regions", slide.slide_id);
        }

        let width = slide
            .width
            .unwrap_or_else(|| tiles.iter().map(|t| t.tile_x + t.width()).max().unwrap_or(0));
        let height = slide
            .height
            .unwrap_or_else(|| tiles.iter().map(|t| t.tile_y + t.height()).max().unwrap_or(0));
        if let Some(t) = tiles.iter().find(|t| t.tile_x + t.width() > width || t.tile_y + t.height() > height) {
            return Err(PipelineError::Manifest(format!(
                "slide {:?}: tile ({}, {}) extends past the slide bounds {width}x{height}",
                slide.slide_id, t.tile_x, t.tile_y
            )));
        }

        let mut store = Vec::with_capacity(regions.len() * (config.patch_size as usize).pow(2) * 3);
        for r in &regions {
            store.extend_from_slice(r.pixels.as_deref().expect("tessellation attaches pixels"));
        }
        write_json(&run.slide_path(&slide.slide_id, files::FOREGROUND), &fg)?;
        write_json(&run.slide_path(&slide.slide_id, files::REGIONS), &regions)?;
        write_atomic(&run.slide_path(&slide.slide_id, files::PATCHES), &store)?;
        log::info!("slide {:?}: {} regions from {} tiles", slide.slide_id, regions.len(), tiles.len());
        infos.push(SlideInfo {
            slide_id: slide.slide_id.clone(),
            width,
            height,
            patch_size: config.patch_size,
            region_count: regions.len(),
            magnification: slide.magnification.clone(),
        });
    }
    write_json(&run.path(files::SLIDES), &infos)?;
    Ok(infos)
}

fn write_target(run: &Run, stats: &ChannelStats) -> Result<()> {
    let text = toml::to_string(stats).expect("stats always serialize");
    write_atomic(&run.path(files::TARGET), text.as_bytes())
}

fn write_matrix(path: &Path, features: &FeatureMatrix) -> Result<()> {
    let mut bytes = Vec::new();
    write_tcf1(features, &mut bytes)?;
    write_atomic(path, &bytes)
}

/// Computes the built-in stand-in features for every stored patch.
pub fn ingest_stand_in(run: &Run) -> Result<FeatureMatrix> {
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for slide in run.slides()? {
        let regions = run.regions_with_pixels(&slide.slide_id)?;
        let feats: Vec<Vec<f64>> = regions
            .par_iter()
            .map(|r| stand_in_extract(r.pixels.as_deref().expect("pixels attached"), r.size))
            .collect::<std::result::Result<_, FeatureError>>()?;
        ids.extend(regions.into_iter().map(|r| r.region_id));
        rows.extend(feats);
    }
    let features = FeatureMatrix::from_rows(ids, &rows)?;
    write_matrix(&run.path(files::FEATURES), &features)?;
    Ok(features)
}

/// Splits `{slide}_{x}_{y}` into its parts.
fn parse_region_id(id: &str) -> Option<(&str, u32, u32)> {
    let mut parts = id.rsplitn(3, '_');
    let y = parts.next()?.parse().ok()?;
    let x = parts.next()?.parse().ok()?;
    let slide = parts.next().filter(|s| !s.is_empty())?;
    Some((slide, x, y))
}

/// Imports an external feature file (TCF1 or CSV). With a preprocessed run the
/// rows are matched to the stored regions; otherwise regions are derived from
/// the `{slide}_{x}_{y}` row ids.
pub fn ingest_features(run: &Run, input: &Path, config: &Config) -> Result<FeatureMatrix> {
    let raw = read_features(input)?;
    let positions: HashMap<&str, usize> = raw.region_ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let order = match run.slides() {
        Ok(slides) => {
            let mut order = Vec::with_capacity(raw.len());
            for s in &slides {
                for r in run.regions(&s.slide_id)? {
                    let &i = positions
                        .get(r.region_id.as_str())
                        .ok_or_else(|| format_err(input, format!("no feature row for region {:?}", r.region_id)))?;
                    order.push(i);
                }
            }
            if order.len() != raw.len() {
                return Err(format_err(
                    input,
                    format!("{} feature rows do not match any region", raw.len() - order.len()),
                ));
            }
            order
        }
        Err(PipelineError::MissingStage { .. }) => derive_regions(run, &raw, input, config)?,
        Err(e) => return Err(e),
    };
    let features = raw.select(&order);
    write_matrix(&run.path(files::FEATURES), &features)?;
    Ok(features)
}

fn derive_regions(run: &Run, raw: &FeatureMatrix, input: &Path, config: &Config) -> Result<Vec<usize>> {
    let size = config.patch_size;
    let mut by_slide: BTreeMap<&str, Vec<(usize, Region)>> = BTreeMap::new();
    for (i, id) in raw.region_ids().iter().enumerate() {
        let (slide, x, y) = parse_region_id(id)
            .ok_or_else(|| format_err(input, format!("region id {id:?} is not of the form slide_x_y")))?;
        by_slide.entry(slide).or_default().push((
            i,
            Region {
                region_id: id.clone(),
                slide_id: slide.to_owned(),
                tile_x: 0,
                tile_y: 0,
                patch_x: x,
                patch_y: y,
                size,
                pixels: None,
            },
        ));
    }
    let mut order = Vec::with_capacity(raw.len());
    let mut infos = Vec::new();
    for (slide, entries) in by_slide {
        let width = entries.iter().map(|(_, r)| r.patch_x + size).max().unwrap_or(0);
        let height = entries.iter().map(|(_, r)| r.patch_y + size).max().unwrap_or(0);
        order.extend(entries.iter().map(|(i, _)| *i));
        let regions: Vec<Region> = entries.into_iter().map(|(_, r)| r).collect();
        write_json(&run.slide_path(slide, files::REGIONS), &regions)?;
        infos.push(SlideInfo {
            slide_id: slide.to_owned(),
            width,
            height,
            patch_size: size,
            region_count: regions.len(),
            magnification: None,
        });
    }
    write_json(&run.path(files::SLIDES), &infos)?;
    Ok(order)
}

/// Fits PCA over all regions of the run and writes the reduced features. The
/// target dimension is capped at `min(d, N - 1)`.
pub fn run_pca(run: &Run, config: &Config) -> Result<PcaModel> {
    let features = run.features()?;
    let cap = features.dim().min(features.len().saturating_sub(1));
    let q = config.pca_dim.min(cap).max(1);
    if q < config.pca_dim {
        log::warn!("pca_dim {} exceeds min(d, N - 1) = {cap}; using {q}", config.pca_dim);
    }
    let model = pca_fit(&features, q)?;
    if model.is_rank_deficient() {
        log::warn!("features have numerical rank {} < {q}", model.numerical_rank);
    }
    let reduced = pca_transform(&model, &features)?;
    write_json(&run.path(files::PCA), &model)?;
    write_matrix(&run.path(files::REDUCED), &reduced)?;
    Ok(model)
}

/// Clusters every slide with regions. Returns the model per slide.
pub fn run_cluster(run: &Run, config: &Config) -> Result<Vec<ClusterModel>> {
    let reduced = run.reduced()?;
    let positions: HashMap<&str, usize> =
        reduced.region_ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut models = Vec::new();
    for (slide_index, slide) in run.slides()?.iter().enumerate() {
        let id = slide.slide_id.as_str();
        let outputs = [files::CLUSTER, files::SILHOUETTE, files::REPRESENTATIVES, files::SWEEP];
        let regions = run.regions(id)?;
        if regions.is_empty() {
            log::warn!("slide {id:?}: no regions to cluster");
            for f in outputs {
                remove_if_exists(&run.slide_path(id, f))?;
            }
            continue;
        }
        let rows = regions
            .iter()
            .map(|r| {
                positions.get(r.region_id.as_str()).copied().ok_or_else(|| PipelineError::MissingStage {
                    stage: "pca",
                    path: run.path(files::REDUCED),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let features = reduced.select(&rows);
        let seed = stage_seed(config.seed, CLUSTER_STREAM, slide_index);

        let (model, sweep) = match config.k {
            Some(k) => (
                kmeans_best_of(&features, k, seed, config.restarts, &config.kmeans_params()).map_err(cluster_err(id))?,
                None,
            ),
            None => {
                let k_max = config.k_max.min(features.len());
                if k_max < config.k_max {
                    log::warn!("slide {id:?}: k_max {} capped at N = {k_max}", config.k_max);
                }
                let sel = select_k_with(&features, seed, &config.select_params(k_max)).map_err(cluster_err(id))?;
                let table = sel.sweep_table();
                (sel.model, Some(table))
            }
        };
        log::info!("slide {id:?}: k = {}", model.k);

        if model.k >= 2 {
            let report = silhouette_sampled(&features, &model, config.silhouette_sample, silhouette_seed(seed, model.k))
                .map_err(cluster_err(id))?;
            write_json(&run.slide_path(id, files::SILHOUETTE), &report)?;
        } else {
            remove_if_exists(&run.slide_path(id, files::SILHOUETTE))?;
        }
        let reps = representatives(&features, &model).map_err(cluster_err(id))?;
        write_json(&run.slide_path(id, files::CLUSTER), &model)?;
        write_json(&run.slide_path(id, files::REPRESENTATIVES), &reps)?;
        match sweep {
            Some(table) => write_atomic(&run.slide_path(id, files::SWEEP), table.as_bytes())?,
            None => remove_if_exists(&run.slide_path(id, files::SWEEP))?,
        }
        models.push(model);
    }
    Ok(models)
}

/// Validates a label map against the slide's model and stores it.
pub fn apply_label_file(run: &Run, slide: &str, labels: &LabelMap) -> Result<()> {
    run.slide(slide)?;
    let model = run.cluster(slide)?;
    if let Some(index) = labels.max_cluster().filter(|&c| c >= model.k) {
        return Err(ClassifyError::UnknownCluster { index, k: model.k }.into());
    }
    run.write_labels(slide, labels)
}

/// Scores one slide's propagated labels against its annotations. Reads only.
pub fn evaluate_slide(
    run: &Run,
    slide: &str,
    labels: &LabelMap,
    rois: &[RoiAnnotation],
    config: &Config,
) -> Result<MetricsRecord> {
    run.slide(slide)?;
    let model = run.cluster(slide)?;
    let regions = run.regions(slide)?;
    let predicted = apply_labels(&model, labels)?;
    let roi = RoiAnnotation::merged_for(rois, slide, config.roi_label.as_deref())
        .ok_or_else(|| PipelineError::NoGroundTruth(slide.to_owned()))?;
    let truth = ground_truth(&regions, &roi, config.truth_rule)?;
    let c = confusion(&predicted, &truth)?;
    let acc = accuracy(&c.counts)?;
    let f = f1(&c.counts);
    Ok(MetricsRecord {
        slide_id: slide.to_owned(),
        k: model.k,
        cluster_set: labels.positive_clusters(),
        accuracy: acc,
        f1: f.value,
        f1_degenerate: f.degenerate,
        confusion: c.counts,
        unlabeled: c.unlabeled,
    })
}

/// `slide,k,cluster_set,accuracy,f1` rows; the cluster set is space separated.
pub fn metrics_table(records: &[MetricsRecord]) -> String {
    let mut out = String::from("slide,k,cluster_set,accuracy,f1\n");
    for r in records {
        let set: Vec<String> = r.cluster_set.iter().map(usize::to_string).collect();
        out.push_str(&format!("{},{},{},{},{}\n", r.slide_id, r.k, set.join(" "), r.accuracy, r.f1));
    }
    out
}

/// Evaluates every annotated slide with its stored labels. `rois`, when given,
/// replaces the run's annotation file first. Slides without annotations or
/// without any labeled region are skipped with a warning.
pub fn run_evaluate(run: &Run, config: &Config, rois: Option<&Path>) -> Result<Vec<MetricsRecord>> {
    if let Some(path) = rois {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        parse_roi_file(&text)?;
        write_atomic(&run.path(files::ROIS), text.as_bytes())?;
    }
    let annotations = run.rois()?.ok_or_else(|| PipelineError::MissingStage {
        stage: "annotations",
        path: run.path(files::ROIS),
    })?;
    let mut records = Vec::new();
    let mut empty = 0;
    for slide in run.slides()? {
        let id = slide.slide_id.as_str();
        let outputs = [files::METRICS, files::SLIDE_METRICS];
        if slide.region_count == 0 {
            continue;
        }
        let labels = run.labels(id)?;
        match evaluate_slide(run, id, &labels, &annotations, config) {
            Ok(record) => {
                write_json(&run.slide_path(id, files::METRICS), &record)?;
                write_atomic(
                    &run.slide_path(id, files::SLIDE_METRICS),
                    metrics_table(std::slice::from_ref(&record)).as_bytes(),
                )?;
                records.push(record);
            }
            Err(e @ (PipelineError::NoGroundTruth(_) | PipelineError::Classify(ClassifyError::EmptyEvaluation))) => {
                log::warn!("slide {id:?} not evaluated: {e}");
                if matches!(e, PipelineError::Classify(_)) {
                    empty += 1;
                }
                for f in outputs {
                    remove_if_exists(&run.slide_path(id, f))?;
                }
            }
            Err(e) => return Err(e),
        }
    }
    if records.is_empty() && empty > 0 {
        return Err(ClassifyError::EmptyEvaluation.into());
    }
    write_atomic(&run.path(files::METRICS_TABLE), metrics_table(&records).as_bytes())?;
    Ok(records)
}

/// Heatmap of one slide for the given labels. Reads only.
pub fn slide_heatmap(run: &Run, slide: &str, labels: &LabelMap, grid: usize) -> Result<HeatmapGrid> {
    let info = run.slide(slide)?;
    let model = run.cluster(slide)?;
    let regions = run.regions(slide)?;
    let classes = apply_labels(&model, labels)?;
    Ok(build_heatmap(slide, &regions, &classes, info.extent(), grid, grid)?)
}

/// Writes `heatmap.csv` and `heatmap.png` for every clustered slide.
pub fn run_heatmap(run: &Run, config: &Config) -> Result<Vec<HeatmapGrid>> {
    let mut grids = Vec::new();
    for slide in run.slides()? {
        let id = slide.slide_id.as_str();
        if slide.region_count == 0 {
            continue;
        }
        let grid = slide_heatmap(run, id, &run.labels(id)?, config.grid)?;
        write_atomic(&run.slide_path(id, files::HEATMAP_CSV), grid.to_csv().as_bytes())?;
        let mut png = std::io::Cursor::new(Vec::new());
        let png_path = run.slide_path(id, files::HEATMAP_PNG);
        grid.write_png(&mut png).map_err(|e| format_err(&png_path, e))?;
        write_atomic(&png_path, png.get_ref())?;
        grids.push(grid);
    }
    Ok(grids)
}

/// Inputs for a full run.
#[derive(Debug, Clone, Default)]
pub struct AllOptions {
    pub manifest: Option<PathBuf>,
    /// External features. Without them the stand-in extractor runs on the
    /// stored patches.
    pub features: Option<PathBuf>,
    pub rois: Option<PathBuf>,
    /// Label maps applied before evaluation, keyed by slide id.
    pub labels: BTreeMap<String, LabelMap>,
}

/// Runs every stage in order on a run directory that already holds its config
/// snapshot.
pub fn run_all(run: &Run, config: &Config, opts: &AllOptions) -> Result<()> {
    match (&opts.manifest, &opts.features) {
        (Some(m), features) => {
            run_preprocess(run, &Manifest::load(m)?, config)?;
            match features {
                Some(f) => ingest_features(run, f, config)?,
                None => ingest_stand_in(run)?,
            };
        }
        (None, Some(f)) => {
            ingest_features(run, f, config)?;
        }
        (None, None) => return Err(PipelineError::Config("a manifest or a feature file is required".into())),
    }
    run_pca(run, config)?;
    run_cluster(run, config)?;
    for (slide, labels) in &opts.labels {
        apply_label_file(run, slide, labels)?;
    }
    if let Some(rois) = &opts.rois {
        if opts.labels.is_empty() {
            let text = std::fs::read_to_string(rois).map_err(io_err(rois))?;
            parse_roi_file(&text)?;
            write_atomic(&run.path(files::ROIS), text.as_bytes())?;
        } else {
            run_evaluate(run, config, Some(rois))?;
        }
    }
    run_heatmap(run, config)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_id_parsing() {
        assert_eq!(parse_region_id("a_b_128_256"), Some(("a_b", 128, 256)));
        assert_eq!(parse_region_id("s_0_0"), Some(("s", 0, 0)));
        assert_eq!(parse_region_id("_0_0"), None);
        assert_eq!(parse_region_id("s_x_0"), None);
        assert_eq!(parse_region_id("r12"), None);
    }

    #[test]
    fn stage_seeds_differ() {
        assert_ne!(stage_seed(1, FOREGROUND_STREAM, 0), stage_seed(1, CLUSTER_STREAM, 0));
        assert_ne!(stage_seed(1, CLUSTER_STREAM, 0), stage_seed(1, CLUSTER_STREAM, 1));
        assert_eq!(stage_seed(1, CLUSTER_STREAM, 2), stage_seed(1, CLUSTER_STREAM, 2));
    }

    #[test]
    fn table_columns() {
        let r = MetricsRecord {
            slide_id: "s".into(),
            k: 26,
            cluster_set: vec![5, 18],
            accuracy: 0.5,
            f1: 0.25,
            f1_degenerate: false,
            confusion: ConfusionCounts::default(),
            unlabeled: 0,
        };
        assert_eq!(metrics_table(&[r]), "slide,k,cluster_set,accuracy,f1\ns,26,5 18,0.5,0.25\n");
    }
}
