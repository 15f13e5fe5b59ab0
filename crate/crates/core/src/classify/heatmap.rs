use std::io::Write;

use image::GrayImage;
use serde::{Deserialize, Serialize};

use super::{ClassifyError, Label, RegionLabels, Result};
use crate::preprocess::Region;

/// Default grid edge (rows = cols).
pub const DEFAULT_GRID: usize = 40;

/// Slide bounds in pixels, origin at the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlideExtent {
    pub width: u32,
    pub height: u32,
}

/// Positive fraction of labeled regions per grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid {
    pub slide_id: String,
    pub rows: usize,
    pub cols: usize,
    /// Row-major, row 0 at the top.
    pub values: Vec<f64>,
    pub positive: Vec<u64>,
    pub total: Vec<u64>,
}

impl HeatmapGrid {
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    /// Comma-separated grid, one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in 0..self.rows {
            let line: Vec<String> = (0..self.cols).map(|c| self.value(r, c).to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// One pixel per cell, intensity `round(value * 255)`.
    pub fn to_image(&self) -> GrayImage {
        GrayImage::from_fn(self.cols as u32, self.rows as u32, |x, y| {
            image::Luma([(self.value(y as usize, x as usize) * 255.0).round() as u8])
        })
    }

    pub fn write_png(&self, out: impl Write + std::io::Seek) -> image::ImageResult<()> {
        let mut out = out;
        self.to_image().write_to(&mut out, image::ImageFormat::Png)
    }

    /// Rows as nested vectors, for structured responses.
    pub fn value_rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }
}

/// Bins regions by center into an equal `rows`×`cols` partition of the slide.
/// Unlabeled regions (and regions without a class) are ignored.
pub fn build_heatmap(
    slide_id: &str,
    regions: &[Region],
    classes: &RegionLabels,
    extent: SlideExtent,
    rows: usize,
    cols: usize,
) -> Result<HeatmapGrid> {
    if rows == 0 || cols == 0 || extent.width == 0 || extent.height == 0 {
        return Err(ClassifyError::InvalidGrid { rows, cols });
    }
    let (w, h) = (extent.width as f64, extent.height as f64);
    let mut positive = vec![0u64; rows * cols];
    let mut total = vec![0u64; rows * cols];
    for r in regions {
        let (x, y) = r.center();
        if !(0.0..=w).contains(&x) || !(0.0..=h).contains(&y) {
            return Err(ClassifyError::OutOfExtent {
                x,
                y,
                width: w,
                height: h,
            });
        }
        let label = classes.get(&r.region_id).copied().unwrap_or(Label::Unlabeled);
        if label == Label::Unlabeled {
            continue;
        }
        let col = ((x * cols as f64 / w) as usize).min(cols - 1);
        let row = ((y * rows as f64 / h) as usize).min(rows - 1);
        let cell = row * cols + col;
        total[cell] += 1;
        if label == Label::Positive {
            positive[cell] += 1;
        }
    }
    let values = positive
        .iter()
        .zip(&total)
        .map(|(&p, &t)| if t == 0 { 0.0 } else { p as f64 / t as f64 })
        .collect();
    Ok(HeatmapGrid {
        slide_id: slide_id.to_owned(),
        rows,
        cols,
        values,
        positive,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::region_id;

    fn region(x: u32, y: u32) -> Region {
        Region {
            region_id: region_id("s", x, y),
            slide_id: "s".into(),
            tile_x: 0,
            tile_y: 0,
            patch_x: x,
            patch_y: y,
            size: 10,
            pixels: None,
        }
    }

    const EXTENT: SlideExtent = SlideExtent { width: 100, height: 100 };

    #[test]
    fn concentrated_positives() {
        let regions = vec![region(0, 0), region(10, 10)];
        let classes = regions.iter().map(|r| (r.region_id.clone(), Label::Positive)).collect();
        let g = build_heatmap("s", &regions, &classes, EXTENT, 4, 4).unwrap();
        assert_eq!(g.value(0, 0), 1.0);
        assert_eq!(g.values.iter().filter(|&&v| v > 0.0).count(), 1);
    }

    #[test]
    fn mixed_cell_ratio() {
        let regions = vec![region(0, 0), region(5, 0), region(0, 5), region(5, 5), region(60, 60)];
        let mut classes: RegionLabels = regions.iter().map(|r| (r.region_id.clone(), Label::Positive)).collect();
        classes.insert(regions[3].region_id.clone(), Label::Negative);
        classes.insert(regions[4].region_id.clone(), Label::Unlabeled);
        let g = build_heatmap("s", &regions, &classes, EXTENT, 2, 2).unwrap();
        assert_eq!(g.value(0, 0), 0.75);
        assert_eq!(g.value(1, 1), 0.0);
        assert_eq!(g.total[3], 0);
        let weighted: f64 = g.values.iter().zip(&g.total).map(|(v, &t)| v * t as f64).sum();
        assert_eq!(weighted, 3.0);
    }

    #[test]
    fn empty_and_errors() {
        let g = build_heatmap("s", &[], &RegionLabels::new(), EXTENT, 40, 40).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
        assert_eq!(g.values.len(), 1600);
        assert!(matches!(
            build_heatmap("s", &[], &RegionLabels::new(), EXTENT, 0, 3),
            Err(ClassifyError::InvalidGrid { .. })
        ));
        let far = vec![region(200, 0)];
        assert!(matches!(
            build_heatmap("s", &far, &RegionLabels::new(), EXTENT, 2, 2),
            Err(ClassifyError::OutOfExtent { .. })
        ));
    }

    #[test]
    fn exports() {
        let regions = vec![region(0, 0)];
        let classes = regions.iter().map(|r| (r.region_id.clone(), Label::Positive)).collect();
        let g = build_heatmap("s", &regions, &classes, EXTENT, 2, 3).unwrap();
        assert_eq!(g.to_csv(), "1,0,0\n0,0,0\n");
        let img = g.to_image();
        assert_eq!(img.dimensions(), (3, 2));
        assert_eq!(img.get_pixel(0, 0).0, [255]);
        assert_eq!(img.get_pixel(2, 1).0, [0]);
        let mut buf = std::io::Cursor::new(Vec::new());
        g.write_png(&mut buf).unwrap();
        assert!(buf.get_ref().starts_with(b"\x89PNG"));
    }
}
