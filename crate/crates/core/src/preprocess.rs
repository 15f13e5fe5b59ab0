//! Tissue foreground detection, Reinhard color normalization and square tessellation.
//!
//! Foreground is separated from glass background with a two-component Gaussian
//! mixture fit on grayscale intensity. Normalization matches per-channel mean and
//! standard deviation in Ruderman's log-opponent lαβ space:
//!
//! ```text
//! LMS = RGB_TO_LMS · RGB            (RGB on the 0..=255 scale)
//! lms = ln(max(LMS, f64::EPSILON))
//! lαβ = diag(1/√3, 1/√6, 1/√2) · [[1, 1, 1], [1, 1, -2], [1, -1, 0]] · lms
//! ```
//!
//! The inverse applies the exact inverse matrices, so a normalization onto a
//! tile's own statistics is the identity up to 8-bit rounding.

use std::sync::LazyLock;

use image::RgbImage;
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("insufficient foreground: {count} masked pixel(s), at least 2 required")]
    InsufficientForeground { count: usize },
    #[error("patch size {patch_size} does not divide tile dimensions {width}x{height}")]
    InvalidPatchSize {
        patch_size: u32,
        width: u32,
        height: u32,
    },
    #[error("mask is {mask_w}x{mask_h} but tile is {tile_w}x{tile_h}")]
    MaskMismatch {
        mask_w: u32,
        mask_h: u32,
        tile_w: u32,
        tile_h: u32,
    },
    #[error("invalid tile: {0}")]
    InvalidTile(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, PreprocessError>;

/// Default tile edge length in pixels.
pub const DEFAULT_TILE_SIZE: u32 = 2048;
/// Default tessellation patch edge length in pixels.
pub const DEFAULT_PATCH_SIZE: u32 = 128;
/// Default minimum foreground fraction for a patch to be emitted.
pub const DEFAULT_MIN_FOREGROUND: f64 = 0.5;
pub const DEFAULT_EM_MAX_ITER: usize = 200;
pub const DEFAULT_EM_TOL: f64 = 1e-6;
/// Lower bound on mixture component variances. Keeps point-mass inputs finite.
pub const MIN_VARIANCE: f64 = 1e-4;

/// An RGB tile cut from a slide, 8 bits per channel, row-major interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    pub slide_id: String,
    pub tile_x: u32,
    pub tile_y: u32,
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Tile {
    pub fn new(
        slide_id: impl Into<String>,
        tile_x: u32,
        tile_y: u32,
        width: u32,
        height: u32,
        pixels: Vec<u8>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(PreprocessError::InvalidTile(format!(
                "tile dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(PreprocessError::InvalidTile(format!(
                "expected {expected} bytes for {width}x{height}x3, got {}",
                pixels.len()
            )));
        }
        Ok(Self {
            slide_id: slide_id.into(),
            tile_x,
            tile_y,
            width,
            height,
            pixels,
        })
    }

    /// Builds a tile by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(
        slide_id: impl Into<String>,
        tile_x: u32,
        tile_y: u32,
        width: u32,
        height: u32,
        mut f: impl FnMut(u32, u32) -> [u8; 3],
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Self::new(slide_id, tile_x, tile_y, width, height, pixels)
    }

    pub fn from_rgb_image(
        slide_id: impl Into<String>,
        tile_x: u32,
        tile_y: u32,
        img: RgbImage,
    ) -> Result<Self> {
        let (w, h) = img.dimensions();
        Self::new(slide_id, tile_x, tile_y, w, h, img.into_raw())
    }

    pub fn to_rgb_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("tile buffer length is validated on construction")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Grayscale intensities, row-major.
    pub fn grayscale(&self) -> Vec<f64> {
        self.pixels
            .chunks_exact(3)
            .map(|p| grayscale([p[0], p[1], p[2]]))
            .collect()
    }

    /// Copies out the `size`×`size` block whose top-left corner is `(x, y)`.
    pub fn crop(&self, x: u32, y: u32, size: u32) -> Vec<u8> {
        let mut out = Vec::with_capacity(size as usize * size as usize * 3);
        for row in y..y + size {
            let start = (row as usize * self.width as usize + x as usize) * 3;
            out.extend_from_slice(&self.pixels[start..start + size as usize * 3]);
        }
        out
    }
}

/// ITU-R 601 luma.
pub fn grayscale(rgb: [u8; 3]) -> f64 {
    0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64
}

/// Per-pixel boolean mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Mask {
    pub fn filled(width: u32, height: u32, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    fn check_matches(&self, tile: &Tile) -> Result<()> {
        if self.width != tile.width || self.height != tile.height {
            return Err(PreprocessError::MaskMismatch {
                mask_w: self.width,
                mask_h: self.height,
                tile_w: tile.width,
                tile_h: tile.height,
            });
        }
        Ok(())
    }
}

/// Two-component 1-D Gaussian mixture over grayscale intensity. Component 0 is
/// the darker one (tissue).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForegroundModel {
    pub mean_0: f64,
    pub mean_1: f64,
    pub var_0: f64,
    pub var_1: f64,
    pub weight_0: f64,
    pub weight_1: f64,
}

impl ForegroundModel {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.mean_0,
            self.mean_1,
            self.var_0,
            self.var_1,
            self.weight_0,
            self.weight_1,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(PreprocessError::InvalidParameter(
                "foreground model has non-finite parameters".into(),
            ));
        }
        if self.var_0 <= 0.0 || self.var_1 <= 0.0 {
            return Err(PreprocessError::InvalidParameter(
                "foreground model variances must be positive".into(),
            ));
        }
        if self.weight_0 < 0.0
            || self.weight_1 < 0.0
            || (self.weight_0 + self.weight_1 - 1.0).abs() > 1e-9
        {
            return Err(PreprocessError::InvalidParameter(
                "foreground model weights must be non-negative and sum to 1".into(),
            ));
        }
        if self.mean_0 > self.mean_1 {
            return Err(PreprocessError::InvalidParameter(
                "foreground model components must be ordered darker-first".into(),
            ));
        }
        Ok(())
    }

    /// `(ln w0 + ln N(x; μ0, σ0²), ln w1 + ln N(x; μ1, σ1²))`
    fn log_joint(&self, x: f64) -> (f64, f64) {
        (
            self.weight_0.ln() + log_normal_pdf(x, self.mean_0, self.var_0),
            self.weight_1.ln() + log_normal_pdf(x, self.mean_1, self.var_1),
        )
    }

    /// Posterior probability that `x` was drawn from the darker component.
    pub fn posterior_dark(&self, x: f64) -> f64 {
        let (a, b) = self.log_joint(x);
        let lse = log_sum_exp(a, b);
        if lse == f64::NEG_INFINITY {
            0.0
        } else {
            (a - lse).exp()
        }
    }

    pub fn is_foreground(&self, x: f64) -> bool {
        self.posterior_dark(x) > 0.5
    }

    pub fn log_likelihood(&self, samples: &[f64]) -> f64 {
        samples
            .iter()
            .map(|&x| {
                let (a, b) = self.log_joint(x);
                log_sum_exp(a, b)
            })
            .sum()
    }
}

fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (d * d / var + var.ln() + (2.0 * std::f64::consts::PI).ln())
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Result of an EM fit together with its log-likelihood trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EmFit {
    pub model: ForegroundModel,
    /// Log-likelihood of the parameters before each M-step, then of the returned model.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn fit_background_model(samples: &[f64], max_iter: usize, tol: f64) -> Result<ForegroundModel> {
    fit_background_model_traced(samples, max_iter, tol).map(|fit| fit.model)
}

/// Expectation-maximization for a two-component Gaussian mixture, initialized
/// with the 25th and 75th percentiles as component means.
pub fn fit_background_model_traced(samples: &[f64], max_iter: usize, tol: f64) -> Result<EmFit> {
    if max_iter == 0 {
        return Err(PreprocessError::InvalidParameter("max_iter must be >= 1".into()));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(PreprocessError::InvalidParameter(
            "samples must be finite".into(),
        ));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = match (sorted.first(), sorted.last()) {
        (Some(&lo), Some(&hi)) if lo < hi => (lo, hi),
        _ => {
            return Err(PreprocessError::DegenerateInput(
                "at least two distinct sample values are required".into(),
            ))
        }
    };

    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let (mut lo, mut hi) = (percentile(&sorted, 0.25), percentile(&sorted, 0.75));
    if lo >= hi {
        lo = min;
        hi = max;
    }
    let mut model = ForegroundModel {
        mean_0: lo,
        mean_1: hi,
        var_0: var.max(MIN_VARIANCE),
        var_1: var.max(MIN_VARIANCE),
        weight_0: 0.5,
        weight_1: 0.5,
    };

    let mut resp = vec![0.0; samples.len()];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iter {
        // E-step
        let mut ll = 0.0;
        for (r, &x) in resp.iter_mut().zip(samples) {
            let (a, b) = model.log_joint(x);
            let lse = log_sum_exp(a, b);
            ll += lse;
            *r = (a - lse).exp();
        }
        if let Some(&prev) = history.last() {
            history.push(ll);
            if (ll - prev).abs() <= tol * f64::abs(prev) {
                converged = true;
                break;
            }
        } else {
            history.push(ll);
        }

        // M-step
        let n0: f64 = resp.iter().sum();
        let n1 = n - n0;
        let next = |weight_sum: f64, r: &dyn Fn(f64) -> f64, old_mean: f64, old_var: f64| {
            if weight_sum <= f64::MIN_POSITIVE {
                return (old_mean, old_var);
            }
            let m = resp
                .iter()
                .zip(samples)
                .map(|(&ri, &x)| r(ri) * x)
                .sum::<f64>()
                / weight_sum;
            let v = resp
                .iter()
                .zip(samples)
                .map(|(&ri, &x)| r(ri) * (x - m).powi(2))
                .sum::<f64>()
                / weight_sum;
            (m, v.max(MIN_VARIANCE))
        };
        let (m0, v0) = next(n0, &|r| r, model.mean_0, model.var_0);
        let (m1, v1) = next(n1, &|r| 1.0 - r, model.mean_1, model.var_1);
        model = ForegroundModel {
            mean_0: m0,
            mean_1: m1,
            var_0: v0,
            var_1: v1,
            weight_0: n0 / n,
            weight_1: n1 / n,
        };
        iterations += 1;
    }
    if !converged {
        history.push(model.log_likelihood(samples));
    }

    if model.mean_0 > model.mean_1 {
        model = ForegroundModel {
            mean_0: model.mean_1,
            mean_1: model.mean_0,
            var_0: model.var_1,
            var_1: model.var_0,
            weight_0: model.weight_1,
            weight_1: model.weight_0,
        };
    }
    Ok(EmFit {
        model,
        log_likelihood: history,
        iterations,
        converged,
    })
}

/// Linear-interpolation percentile of an ascending slice.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Marks a pixel foreground iff the darker component's posterior exceeds 0.5.
pub fn segment_foreground(tile: &Tile, model: &ForegroundModel) -> Mask {
    Mask {
        width: tile.width,
        height: tile.height,
        bits: tile
            .pixels
            .chunks_exact(3)
            .map(|p| model.is_foreground(grayscale([p[0], p[1], p[2]])))
            .collect(),
    }
}

const RGB_TO_LMS: [[f64; 3]; 3] = [
    [0.3811, 0.5783, 0.0402],
    [0.1967, 0.7244, 0.0782],
    [0.0241, 0.1288, 0.8444],
];

static LMS_TO_RGB: LazyLock<Matrix3<f64>> = LazyLock::new(|| {
    Matrix3::from_fn(|r, c| RGB_TO_LMS[r][c])
        .try_inverse()
        .expect("RGB to LMS matrix is invertible")
});

static LMS_TO_LAB: LazyLock<Matrix3<f64>> = LazyLock::new(|| {
    let scale = Matrix3::from_diagonal(&nalgebra::Vector3::new(
        1.0 / 3f64.sqrt(),
        1.0 / 6f64.sqrt(),
        1.0 / 2f64.sqrt(),
    ));
    let mix = Matrix3::new(1.0, 1.0, 1.0, 1.0, 1.0, -2.0, 1.0, -1.0, 0.0);
    scale * mix
});

static LAB_TO_LMS: LazyLock<Matrix3<f64>> = LazyLock::new(|| {
    LMS_TO_LAB
        .try_inverse()
        .expect("LMS to lαβ matrix is invertible")
});

/// RGB (0..=255 scale) to lαβ.
pub fn rgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let lms = Matrix3::from_fn(|r, c| RGB_TO_LMS[r][c]) * nalgebra::Vector3::from(rgb);
    let log_lms = lms.map(|v| v.max(f64::EPSILON).ln());
    let lab = *LMS_TO_LAB * log_lms;
    [lab[0], lab[1], lab[2]]
}

/// lαβ to RGB (0..=255 scale, unclamped).
pub fn lab_to_rgb(lab: [f64; 3]) -> [f64; 3] {
    let lms = (*LAB_TO_LMS * nalgebra::Vector3::from(lab)).map(f64::exp);
    let rgb = *LMS_TO_RGB * lms;
    [rgb[0], rgb[1], rgb[2]]
}

/// Per-channel mean and (population) standard deviation in lαβ space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean_l: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub std_l: f64,
    pub std_a: f64,
    pub std_b: f64,
}

impl ChannelStats {
    pub fn means(&self) -> [f64; 3] {
        [self.mean_l, self.mean_a, self.mean_b]
    }

    pub fn stds(&self) -> [f64; 3] {
        [self.std_l, self.std_a, self.std_b]
    }

    pub fn from_parts(means: [f64; 3], stds: [f64; 3]) -> Self {
        Self {
            mean_l: means[0],
            mean_a: means[1],
            mean_b: means[2],
            std_l: stds[0],
            std_a: stds[1],
            std_b: stds[2],
        }
    }

    /// Statistics of a collection of lαβ values.
    pub fn from_lab_values(values: &[[f64; 3]]) -> Result<Self> {
        if values.len() < 2 {
            return Err(PreprocessError::InsufficientForeground {
                count: values.len(),
            });
        }
        let n = values.len() as f64;
        let mut means = [0.0; 3];
        for v in values {
            for c in 0..3 {
                means[c] += v[c];
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = [0.0; 3];
        for v in values {
            for c in 0..3 {
                vars[c] += (v[c] - means[c]).powi(2);
            }
        }
        Ok(Self::from_parts(means, vars.map(|s| (s / n).sqrt())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.means().iter().chain(&self.stds()).any(|v| !v.is_finite()) {
            return Err(PreprocessError::InvalidParameter(
                "channel statistics must be finite".into(),
            ));
        }
        if self.stds().iter().any(|&s| s < 0.0) {
            return Err(PreprocessError::InvalidParameter(
                "channel standard deviations must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

fn masked_lab(tile: &Tile, mask: &Mask) -> Vec<[f64; 3]> {
    tile.pixels
        .chunks_exact(3)
        .zip(&mask.bits)
        .filter(|(_, &m)| m)
        .map(|(p, _)| rgb_to_lab([p[0] as f64, p[1] as f64, p[2] as f64]))
        .collect()
}

pub fn compute_color_stats(tile: &Tile, mask: &Mask) -> Result<ChannelStats> {
    mask.check_matches(tile)?;
    ChannelStats::from_lab_values(&masked_lab(tile, mask))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReinhardOutput {
    pub tile: Tile,
    /// Mapped lαβ values of the masked pixels in row-major order, before
    /// conversion back to 8-bit RGB.
    pub transformed: Vec<[f64; 3]>,
    pub source: ChannelStats,
    /// Channels where the source had zero spread but the target did not; those
    /// channels were shifted onto the target mean without scaling.
    pub degenerate_channels: [bool; 3],
}

impl ReinhardOutput {
    pub fn is_degenerate(&self) -> bool {
        self.degenerate_channels.iter().any(|&d| d)
    }
}

/// Spread below which a channel is treated as constant.
const ZERO_STD: f64 = 1e-12;

/// Maps masked pixels so their lαβ statistics match `target`. Unmasked pixels
/// pass through untouched.
pub fn reinhard_normalize(tile: &Tile, mask: &Mask, target: &ChannelStats) -> Result<ReinhardOutput> {
    mask.check_matches(tile)?;
    target.validate()?;
    let lab = masked_lab(tile, mask);
    let source = ChannelStats::from_lab_values(&lab)?;

    let (src_mu, src_sd) = (source.means(), source.stds());
    let (tgt_mu, tgt_sd) = (target.means(), target.stds());
    let mut degenerate = [false; 3];
    let mut scale = [1.0; 3];
    for c in 0..3 {
        if src_sd[c] <= ZERO_STD {
            degenerate[c] = tgt_sd[c] > 0.0;
        } else {
            scale[c] = tgt_sd[c] / src_sd[c];
        }
    }

    let transformed: Vec<[f64; 3]> = lab
        .iter()
        .map(|v| std::array::from_fn(|c| (v[c] - src_mu[c]) * scale[c] + tgt_mu[c]))
        .collect();

    let mut pixels = tile.pixels.clone();
    let mut mapped = transformed.iter();
    for (p, &m) in pixels.chunks_exact_mut(3).zip(&mask.bits) {
        if !m {
            continue;
        }
        let rgb = lab_to_rgb(*mapped.next().expect("one mapped value per masked pixel"));
        for c in 0..3 {
            p[c] = quantize(rgb[c]);
        }
    }

    Ok(ReinhardOutput {
        tile: Tile {
            pixels,
            ..tile.clone()
        },
        transformed,
        source,
        degenerate_channels: degenerate,
    })
}

fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        0
    } else {
        v.round().clamp(0.0, 255.0) as u8
    }
}

/// One square tessellation patch. Coordinates are in slide pixels: the tile
/// origin plus the patch offset within the tile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub region_id: String,
    pub slide_id: String,
    pub tile_x: u32,
    pub tile_y: u32,
    pub patch_x: u32,
    pub patch_y: u32,
    pub size: u32,
    #[serde(skip)]
    pub pixels: Option<Vec<u8>>,
}

impl Region {
    pub fn slide_x(&self) -> u32 {
        self.tile_x + self.patch_x
    }

    pub fn slide_y(&self) -> u32 {
        self.tile_y + self.patch_y
    }

    /// Center point in slide pixel coordinates.
    pub fn center(&self) -> (f64, f64) {
        let half = self.size as f64 / 2.0;
        (self.slide_x() as f64 + half, self.slide_y() as f64 + half)
    }
}

/// Deterministic region identifier built from the slide id and the patch origin
/// in slide coordinates.
pub fn region_id(slide_id: &str, slide_x: u32, slide_y: u32) -> String {
    format!("{slide_id}_{slide_x}_{slide_y}")
}

/// Cuts the tile into a grid of `patch_size` squares and keeps those whose
/// foreground fraction is at least `min_foreground`. Output is row-major.
pub fn tessellate(tile: &Tile, mask: &Mask, patch_size: u32, min_foreground: f64) -> Result<Vec<Region>> {
    mask.check_matches(tile)?;
    if patch_size == 0 || !tile.width.is_multiple_of(patch_size) || !tile.height.is_multiple_of(patch_size) {
        return Err(PreprocessError::InvalidPatchSize {
            patch_size,
            width: tile.width,
            height: tile.height,
        });
    }
    if !(0.0..=1.0).contains(&min_foreground) {
        return Err(PreprocessError::InvalidParameter(format!(
            "min_foreground must lie in [0, 1], got {min_foreground}"
        )));
    }
    let area = (patch_size as usize * patch_size as usize) as f64;
    let mut regions = Vec::new();
    for py in (0..tile.height).step_by(patch_size as usize) {
        for px in (0..tile.width).step_by(patch_size as usize) {
            let mut fg = 0usize;
            for y in py..py + patch_size {
                let row = y as usize * tile.width as usize;
                fg += mask.bits[row + px as usize..row + (px + patch_size) as usize]
                    .iter()
                    .filter(|&&b| b)
                    .count();
            }
            if fg as f64 / area >= min_foreground {
                regions.push(Region {
                    region_id: region_id(&tile.slide_id, tile.tile_x + px, tile.tile_y + py),
                    slide_id: tile.slide_id.clone(),
                    tile_x: tile.tile_x,
                    tile_y: tile.tile_y,
                    patch_x: px,
                    patch_y: py,
                    size: patch_size,
                    pixels: Some(tile.crop(px, py, patch_size)),
                });
            }
        }
    }
    Ok(regions)
}
