//! Feature file formats.
//!
//! `TCF1` (binary, little-endian):
//!
//! ```text
//! b"TCF1" | N: u32 | d: u32 | N*d f32, row-major | N x (len: u16, len bytes of UTF-8 region id)
//! ```
//!
//! The plain-text alternative has a header `region_id,f0,...,f{d-1}` followed by
//! one comma-separated row per region.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{FeatureError, FeatureMatrix, Result};

pub const TCF1_MAGIC: &[u8; 4] = b"TCF1";

/// Encodes a matrix as TCF1. Values are narrowed to `f32`.
pub fn write_tcf1(features: &FeatureMatrix, mut out: impl Write) -> Result<()> {
    let n = u32::try_from(features.len())
        .map_err(|_| FeatureError::Format("too many rows for TCF1".into()))?;
    let d = u32::try_from(features.dim())
        .map_err(|_| FeatureError::Format("dimension too large for TCF1".into()))?;
    let mut buf = Vec::with_capacity(12 + features.data().len() * 4);
    buf.extend_from_slice(TCF1_MAGIC);
    buf.extend_from_slice(&n.to_le_bytes());
    buf.extend_from_slice(&d.to_le_bytes());
    for &v in features.data() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    for id in features.region_ids() {
        let len = u16::try_from(id.len())
            .map_err(|_| FeatureError::Format(format!("region id longer than 65535 bytes: {id:.32}...")))?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(id.as_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| FeatureError::Format(format!("truncated while reading {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }
}

pub fn read_tcf1(bytes: &[u8]) -> Result<FeatureMatrix> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != TCF1_MAGIC {
        return Err(FeatureError::Format("missing TCF1 magic".into()));
    }
    let n = cur.u32("row count")? as usize;
    let d = cur.u32("dimension")? as usize;
    let count = n
        .checked_mul(d)
        .ok_or_else(|| FeatureError::Format("N*d overflows".into()))?;
    let raw = cur.take(
        count
            .checked_mul(4)
            .ok_or_else(|| FeatureError::Format("N*d overflows".into()))?,
        "feature values",
    )?;
    let data: Vec<f64> = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let mut ids = Vec::with_capacity(n);
    for i in 0..n {
        let len = cur.u16("region id length")? as usize;
        let text = cur.take(len, "region id")?;
        let id = std::str::from_utf8(text)
            .map_err(|_| FeatureError::Format(format!("region id {i} is not UTF-8")))?;
        ids.push(id.to_owned());
    }
    if cur.pos != bytes.len() {
        return Err(FeatureError::Format(format!(
            "{} trailing byte(s) after region ids",
            bytes.len() - cur.pos
        )));
    }
    FeatureMatrix::new(ids, data, d)
}

pub fn write_csv(features: &FeatureMatrix, mut out: impl Write) -> Result<()> {
    let mut text = String::from("region_id");
    for j in 0..features.dim() {
        text.push_str(&format!(",f{j}"));
    }
    text.push('\n');
    for (id, row) in features.region_ids().iter().zip(features.rows()) {
        if id.contains(',') || id.contains('\n') {
            return Err(FeatureError::Format(format!(
                "region id {id:?} cannot be written as CSV"
            )));
        }
        text.push_str(id);
        for v in row {
            text.push_str(&format!(",{v}"));
        }
        text.push('\n');
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

pub fn read_csv(text: &str) -> Result<FeatureMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| FeatureError::Format("empty feature table".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"region_id") {
        return Err(FeatureError::Format(
            "header must start with `region_id`".into(),
        ));
    }
    let dim = cols.len() - 1;
    for (j, c) in cols[1..].iter().enumerate() {
        if *c != format!("f{j}") {
            return Err(FeatureError::Format(format!(
                "header column {} should be `f{j}`, found `{c}`",
                j + 1
            )));
        }
    }
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let mut fields = line.split(',').map(str::trim);
        let id = fields.next().unwrap_or_default();
        let before = data.len();
        for f in fields {
            let v: f64 = f.parse().map_err(|_| {
                FeatureError::Format(format!("row {}: cannot parse {f:?}", lineno + 1))
            })?;
            data.push(v);
        }
        if data.len() - before != dim {
            return Err(FeatureError::DimensionMismatch {
                expected: dim,
                found: data.len() - before,
            });
        }
        ids.push(id.to_owned());
    }
    FeatureMatrix::new(ids, data, dim)
}

/// Reads either format, detected by the TCF1 magic bytes.
pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(TCF1_MAGIC) {
        read_tcf1(&bytes)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| FeatureError::Format("feature table is not UTF-8".into()))?;
        read_csv(&text)
    }
}
