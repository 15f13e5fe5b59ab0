use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{format_err, io_err, PipelineError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TileRecord {
    /// Tile origin in slide pixels.
    pub x: u32,
    pub y: u32,
    /// Image file. Defaults to `{slide_id}_{x}_{y}.png` next to the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlideManifest {
    pub slide_id: String,
    /// Slide bounds. When absent they are taken from the tile extents.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnification: Option<String>,
    pub tiles: Vec<TileRecord>,
}

impl SlideManifest {
    pub fn tile_path(&self, tile: &TileRecord) -> PathBuf {
        tile.path
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("{}_{}_{}.png", self.slide_id, tile.x, tile.y)))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub slides: Vec<SlideManifest>,
}

impl Manifest {
    pub fn from_toml(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| PipelineError::Manifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    /// Reads a manifest and makes every tile path absolute relative to the
    /// manifest's directory. Slides are sorted by id.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut m = Self::from_toml(&text).map_err(|e| match e {
            PipelineError::Manifest(msg) => format_err(path, msg),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let base = std::path::absolute(base).map_err(io_err(base))?;
        for slide in &mut m.slides {
            for i in 0..slide.tiles.len() {
                let p = slide.tile_path(&slide.tiles[i]);
                slide.tiles[i].path = Some(base.join(p));
            }
        }
        m.slides.sort_by(|a, b| a.slide_id.cmp(&b.slide_id));
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(PipelineError::Manifest(m));
        let mut ids = BTreeSet::new();
        for s in &self.slides {
            if s.slide_id.is_empty() || s.slide_id.contains(['/', '\\']) || s.slide_id.starts_with('.') {
                return fail(format!("invalid slide id {:?}", s.slide_id));
            }
            if !ids.insert(&s.slide_id) {
                return fail(format!("duplicate slide id {:?}", s.slide_id));
            }
            if s.tiles.is_empty() {
                return fail(format!("slide {:?} lists no tiles", s.slide_id));
            }
            let mut coords = BTreeSet::new();
            for t in &s.tiles {
                if !coords.insert((t.x, t.y)) {
                    return fail(format!("slide {:?} lists tile ({}, {}) twice", s.slide_id, t.x, t.y));
                }
            }
        }
        Ok(())
    }
}
