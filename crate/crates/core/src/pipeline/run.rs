use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{format_err, io_err, Config, PipelineError, Result};
use crate::classify::{parse_roi_file, LabelMap, RoiAnnotation, SlideExtent};
use crate::clustering::{ClusterModel, RepresentativeSet, SilhouetteReport};
use crate::features::{read_tcf1, FeatureMatrix, PcaModel};
use crate::preprocess::{ChannelStats, Region};

/// File names inside a run directory.
pub mod files {
    pub const CONFIG: &str = "config.toml";
    pub const LOCK: &str = "run.lock";
    pub const MANIFEST: &str = "manifest.toml";
    pub const TARGET: &str = "target.toml";
    pub const SLIDES: &str = "slides.json";
    pub const FEATURES: &str = "features.tcf";
    pub const PCA: &str = "pca.json";
    pub const REDUCED: &str = "reduced.tcf";
    pub const ROIS: &str = "rois.txt";
    pub const METRICS_TABLE: &str = "metrics.csv";
    pub const SLIDE_DIR: &str = "slides";

    // Per-slide files.
    pub const FOREGROUND: &str = "foreground.json";
    pub const REGIONS: &str = "regions.json";
    pub const PATCHES: &str = "patches.bin";
    pub const CLUSTER: &str = "cluster.json";
    pub const SILHOUETTE: &str = "silhouette.json";
    pub const SWEEP: &str = "sweep.csv";
    pub const REPRESENTATIVES: &str = "representatives.json";
    pub const LABELS: &str = "labels.csv";
    pub const METRICS: &str = "metrics.json";
    pub const SLIDE_METRICS: &str = "metrics.csv";
    pub const HEATMAP_CSV: &str = "heatmap.csv";
    pub const HEATMAP_PNG: &str = "heatmap.png";
    pub const SESSION: &str = "session.json";
}

/// Summary of one slide as recorded by the ingest stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlideInfo {
    pub slide_id: String,
    pub width: u32,
    pub height: u32,
    pub patch_size: u32,
    pub region_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnification: Option<String>,
}

impl SlideInfo {
    pub fn extent(&self) -> SlideExtent {
        SlideExtent {
            width: self.width,
            height: self.height,
        }
    }
}

/// Exclusive ownership of a run directory, released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(files::LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(PipelineError::Locked(path)),
            Err(e) => Err(PipelineError::Io { path, source: e }),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Handle on a run directory. Every stage reads its inputs from here and writes
/// its outputs back, so stages can be rerun independently.
#[derive(Debug, Clone)]
pub struct Run {
    dir: PathBuf,
}

impl Run {
    pub fn open(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// Creates the directory and writes the config snapshot.
    pub fn create(dir: impl Into<PathBuf>, config: &Config) -> Result<Self> {
        let run = Self::open(dir);
        fs::create_dir_all(&run.dir).map_err(io_err(&run.dir))?;
        run.write_config(config)?;
        Ok(run)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn slide_dir(&self, slide: &str) -> PathBuf {
        self.dir.join(files::SLIDE_DIR).join(slide)
    }

    pub fn slide_path(&self, slide: &str, name: &str) -> PathBuf {
        self.slide_dir(slide).join(name)
    }

    pub fn write_config(&self, config: &Config) -> Result<()> {
        config.validate()?;
        write_atomic(&self.path(files::CONFIG), config.to_toml().as_bytes())
    }

    pub fn config(&self) -> Result<Config> {
        let path = self.path(files::CONFIG);
        require(&path, "init")?;
        Config::load(&path)
    }

    pub fn target(&self) -> Result<ChannelStats> {
        read_toml(&self.path(files::TARGET), "preprocess")
    }

    pub fn slides(&self) -> Result<Vec<SlideInfo>> {
        read_json(&self.path(files::SLIDES), "ingest")
    }

    pub fn slide(&self, slide: &str) -> Result<SlideInfo> {
        self.slides()?
            .into_iter()
            .find(|s| s.slide_id == slide)
            .ok_or_else(|| PipelineError::UnknownSlide(slide.to_owned()))
    }

    pub fn regions(&self, slide: &str) -> Result<Vec<Region>> {
        read_json(&self.slide_path(slide, files::REGIONS), "ingest")
    }

    /// Raw patch store of a slide: `size*size*3` bytes per region, in region order.
    pub fn patches(&self, slide: &str) -> Result<Vec<u8>> {
        let path = self.slide_path(slide, files::PATCHES);
        require(&path, "preprocess")?;
        fs::read(&path).map_err(io_err(&path))
    }

    /// Regions with their pixels attached from the patch store.
    pub fn regions_with_pixels(&self, slide: &str) -> Result<Vec<Region>> {
        let mut regions = self.regions(slide)?;
        let path = self.slide_path(slide, files::PATCHES);
        let store = self.patches(slide)?;
        let mut offset = 0usize;
        for r in &mut regions {
            let len = r.size as usize * r.size as usize * 3;
            let chunk = store
                .get(offset..offset + len)
                .ok_or_else(|| format_err(&path, "patch store is shorter than the region list"))?;
            r.pixels = Some(chunk.to_vec());
            offset += len;
        }
        if offset != store.len() {
            return Err(format_err(&path, "patch store is longer than the region list"));
        }
        Ok(regions)
    }

    pub fn features(&self) -> Result<FeatureMatrix> {
        read_matrix(&self.path(files::FEATURES), "ingest-features")
    }

    pub fn pca(&self) -> Result<PcaModel> {
        read_json(&self.path(files::PCA), "pca")
    }

    pub fn reduced(&self) -> Result<FeatureMatrix> {
        read_matrix(&self.path(files::REDUCED), "pca")
    }

    pub fn cluster(&self, slide: &str) -> Result<ClusterModel> {
        read_json(&self.slide_path(slide, files::CLUSTER), "cluster")
    }

    pub fn silhouette(&self, slide: &str) -> Result<SilhouetteReport> {
        read_json(&self.slide_path(slide, files::SILHOUETTE), "cluster")
    }

    pub fn representatives(&self, slide: &str) -> Result<RepresentativeSet> {
        read_json(&self.slide_path(slide, files::REPRESENTATIVES), "cluster")
    }

    /// Current label map of a slide; empty when no labels were applied yet.
    pub fn labels(&self, slide: &str) -> Result<LabelMap> {
        let path = self.slide_path(slide, files::LABELS);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(LabelMap::parse(&text)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(LabelMap::new()),
            Err(e) => Err(PipelineError::Io { path, source: e }),
        }
    }

    pub fn write_labels(&self, slide: &str, labels: &LabelMap) -> Result<()> {
        write_atomic(&self.slide_path(slide, files::LABELS), labels.to_file_string().as_bytes())
    }

    /// Annotations stored with the run, if any.
    pub fn rois(&self) -> Result<Option<Vec<RoiAnnotation>>> {
        let path = self.path(files::ROIS);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(Some(parse_roi_file(&text)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(PipelineError::Io { path, source: e }),
        }
    }
}

fn require(path: &Path, stage: &'static str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::MissingStage {
            stage,
            path: path.to_owned(),
        })
    }
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path, stage: &'static str) -> Result<T> {
    require(path, stage)?;
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|e| format_err(path, e))
}

pub(crate) fn read_toml<T: DeserializeOwned>(path: &Path, stage: &'static str) -> Result<T> {
    require(path, stage)?;
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    toml::from_str(&text).map_err(|e| format_err(path, e))
}

fn read_matrix(path: &Path, stage: &'static str) -> Result<FeatureMatrix> {
    require(path, stage)?;
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(read_tcf1(&bytes)?)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| format_err(path, e))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub(crate) fn remove_if_exists(path: &Path) -> Result<()> {
    match fs::remove_file(path) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(PipelineError::Io {
            path: path.to_owned(),
            source: e,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let lock = RunLock::acquire(dir.path()).unwrap();
        assert!(matches!(RunLock::acquire(dir.path()), Err(PipelineError::Locked(_))));
        drop(lock);
        RunLock::acquire(dir.path()).unwrap();
    }

    #[test]
    fn missing_stage_and_config_snapshot() {
        let dir = tempfile::tempdir().unwrap();
        let run = Run::open(dir.path());
        assert!(matches!(run.config(), Err(PipelineError::MissingStage { .. })));
        assert!(matches!(run.cluster("s"), Err(PipelineError::MissingStage { stage: "cluster", .. })));
        let config = Config {
            seed: 4,
            ..Config::default()
        };
        let run = Run::create(dir.path(), &config).unwrap();
        assert_eq!(run.config().unwrap(), config);
        assert!(run.labels("s").unwrap().labeled().next().is_none());
        assert!(run.rois().unwrap().is_none());
    }
}
