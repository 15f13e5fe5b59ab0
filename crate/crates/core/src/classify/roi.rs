use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ClassifyError, Result};
use crate::preprocess::Region;

/// Expert-drawn polygons for one slide and one positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiAnnotation {
    pub slide_id: String,
    pub label: String,
    /// Closed polygons in slide pixel coordinates (last vertex joins the first).
    pub polygons: Vec<Vec<(f64, f64)>>,
}

impl RoiAnnotation {
    pub fn empty(slide_id: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            slide_id: slide_id.into(),
            label: label.into(),
            polygons: Vec::new(),
        }
    }

    /// Union of the polygons for `slide_id`, optionally restricted to one label.
    pub fn merged_for(annotations: &[RoiAnnotation], slide_id: &str, label: Option<&str>) -> Option<Self> {
        let mut matching = annotations
            .iter()
            .filter(|a| a.slide_id == slide_id && label.is_none_or(|l| a.label == l))
            .peekable();
        let first = matching.peek()?;
        let mut merged = Self::empty(slide_id, first.label.clone());
        for a in matching {
            merged.polygons.extend(a.polygons.iter().cloned());
        }
        Some(merged)
    }

    /// Checks that every vertex lies inside `[0, width] x [0, height]`.
    pub fn check_bounds(&self, width: f64, height: f64) -> Result<()> {
        for p in &self.polygons {
            for &(x, y) in p {
                if !(0.0..=width).contains(&x) || !(0.0..=height).contains(&y) {
                    return Err(ClassifyError::OutOfExtent { x, y, width, height });
                }
            }
        }
        Ok(())
    }
}

/// Parses ROI records, one polygon per line: `slide_id; label; x0,y0 x1,y1 ...`.
/// Records are grouped by `(slide_id, label)` in order of first appearance.
pub fn parse_roi_file(text: &str) -> Result<Vec<RoiAnnotation>> {
    let mut groups: Vec<RoiAnnotation> = Vec::new();
    let mut index: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| ClassifyError::Parse { line: i + 1, message };
        let fields: Vec<&str> = line.split(';').map(str::trim).collect();
        let [slide, label, coords] = fields[..] else {
            return Err(err("expected `slide_id; label; x0,y0 x1,y1 ...`".into()));
        };
        if slide.is_empty() {
            return Err(err("empty slide id".into()));
        }
        let mut polygon = Vec::new();
        for pair in coords.split_whitespace() {
            let (x, y) = pair
                .split_once(',')
                .ok_or_else(|| err(format!("vertex {pair:?} is not `x,y`")))?;
            let parse = |v: &str| {
                v.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("invalid coordinate {v:?}")))
            };
            polygon.push((parse(x)?, parse(y)?));
        }
        if polygon.len() < 3 {
            return Err(err(format!("polygon needs at least 3 vertices, got {}", polygon.len())));
        }
        let key = (slide.to_owned(), label.to_owned());
        let at = *index.entry(key).or_insert_with(|| {
            groups.push(RoiAnnotation::empty(slide, label));
            groups.len() - 1
        });
        groups[at].polygons.push(polygon);
    }
    Ok(groups)
}

/// How a region is matched against the annotation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthRule {
    /// Region center inside any polygon (even-odd, boundary inclusive).
    #[default]
    Center,
    /// Covered area fraction of the region square at least 0.5.
    AreaOverlap,
}

/// Even-odd point-in-polygon test; points on an edge or vertex count as inside.
pub fn point_in_polygon(p: (f64, f64), polygon: &[(f64, f64)]) -> bool {
    let n = polygon.len();
    let (px, py) = p;
    let mut inside = false;
    for i in 0..n {
        let (ax, ay) = polygon[i];
        let (bx, by) = polygon[(i + 1) % n];
        let cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
        if cross == 0.0
            && px >= ax.min(bx)
            && px <= ax.max(bx)
            && py >= ay.min(by)
            && py <= ay.max(by)
        {
            return true;
        }
        if (ay > py) != (by > py) {
            let x_at = ax + (py - ay) * (bx - ax) / (by - ay);
            if px < x_at {
                inside = !inside;
            }
        }
    }
    inside
}

/// Area of `polygon` clipped to the axis-aligned box (Sutherland-Hodgman).
fn clipped_area(polygon: &[(f64, f64)], x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    type Inside = fn((f64, f64), f64) -> bool;
    let edges: [(Inside, f64, bool); 4] = [
        (|p, v| p.0 >= v, x0, true),
        (|p, v| p.0 <= v, x1, true),
        (|p, v| p.1 >= v, y0, false),
        (|p, v| p.1 <= v, y1, false),
    ];
    let mut poly: Vec<(f64, f64)> = polygon.to_vec();
    for (inside, v, vertical) in edges {
        if poly.is_empty() {
            break;
        }
        let intersect = |a: (f64, f64), b: (f64, f64)| {
            if vertical {
                let t = (v - a.0) / (b.0 - a.0);
                (v, a.1 + t * (b.1 - a.1))
            } else {
                let t = (v - a.1) / (b.1 - a.1);
                (a.0 + t * (b.0 - a.0), v)
            }
        };
        let mut out = Vec::with_capacity(poly.len() + 4);
        for i in 0..poly.len() {
            let cur = poly[i];
            let prev = poly[(i + poly.len() - 1) % poly.len()];
            match (inside(cur, v), inside(prev, v)) {
                (true, true) => out.push(cur),
                (true, false) => {
                    out.push(intersect(prev, cur));
                    out.push(cur);
                }
                (false, true) => out.push(intersect(prev, cur)),
                (false, false) => {}
            }
        }
        poly = out;
    }
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (ax, ay) = poly[i];
            let (bx, by) = poly[(i + 1) % n];
            ax * by - bx * ay
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

/// Ground-truth class per region. Polygons are assumed not to overlap each other
/// under [`TruthRule::AreaOverlap`].
pub fn ground_truth(regions: &[Region], rois: &RoiAnnotation, rule: TruthRule) -> Result<BTreeMap<String, bool>> {
    let mut truth = BTreeMap::new();
    for r in regions {
        if r.slide_id != rois.slide_id {
            return Err(ClassifyError::SlideMismatch {
                region_slide: r.slide_id.clone(),
                roi_slide: rois.slide_id.clone(),
            });
        }
        let positive = match rule {
            TruthRule::Center => {
                let c = r.center();
                rois.polygons.iter().any(|p| point_in_polygon(c, p))
            }
            TruthRule::AreaOverlap => {
                let (x0, y0) = (r.slide_x() as f64, r.slide_y() as f64);
                let s = r.size as f64;
                let covered: f64 = rois
                    .polygons
                    .iter()
                    .map(|p| clipped_area(p, x0, y0, x0 + s, y0 + s))
                    .sum();
                (covered / (s * s)).min(1.0) >= 0.5
            }
        };
        truth.insert(r.region_id.clone(), positive);
    }
    Ok(truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::region_id;

    fn region(slide: &str, x: u32, y: u32, size: u32) -> Region {
        Region {
            region_id: region_id(slide, x, y),
            slide_id: slide.into(),
            tile_x: 0,
            tile_y: 0,
            patch_x: x,
            patch_y: y,
            size,
            pixels: None,
        }
    }

    fn square(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<(f64, f64)> {
        vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    }

    #[test]
    fn center_rule() {
        let roi = RoiAnnotation {
            slide_id: "s".into(),
            label: "tumor".into(),
            polygons: vec![square(0.0, 0.0, 200.0, 200.0)],
        };
        let regions = vec![
            region("s", 90, 90, 20),   // center (100, 100)
            region("s", 300, 300, 20), // outside
            region("s", 190, 50, 20),  // center (200, 60), on the right edge
        ];
        let t = ground_truth(&regions, &roi, TruthRule::Center).unwrap();
        assert_eq!(t["s_90_90"], true);
        assert_eq!(t["s_300_300"], false);
        assert_eq!(t["s_190_50"], true);

        let other = vec![region("t", 0, 0, 10)];
        assert!(matches!(
            ground_truth(&other, &roi, TruthRule::Center),
            Err(ClassifyError::SlideMismatch { .. })
        ));
    }

    #[test]
    fn boundary_points_by_direct_evaluation() {
        let tri = vec![(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)];
        assert!(point_in_polygon((5.0, 5.0), &tri)); // hypotenuse
        assert!(point_in_polygon((0.0, 0.0), &tri)); // vertex
        assert!(point_in_polygon((0.0, 4.0), &tri)); // left edge
        assert!(point_in_polygon((2.0, 2.0), &tri));
        assert!(!point_in_polygon((6.0, 5.0), &tri));
        assert!(!point_in_polygon((-0.1, 4.0), &tri));
        // Concave "U": the notch is outside.
        let u = vec![(0.0, 0.0), (30.0, 0.0), (30.0, 30.0), (20.0, 30.0), (20.0, 10.0), (10.0, 10.0), (10.0, 30.0), (0.0, 30.0)];
        assert!(!point_in_polygon((15.0, 20.0), &u));
        assert!(point_in_polygon((5.0, 20.0), &u));
        assert!(point_in_polygon((15.0, 5.0), &u));
    }

    #[test]
    fn area_overlap_rule() {
        let roi = RoiAnnotation {
            slide_id: "s".into(),
            label: "tumor".into(),
            polygons: vec![square(0.0, 0.0, 15.0, 100.0)],
        };
        // Region [0,20): 75% covered. Region [10,30): 25% covered.
        let regions = vec![region("s", 0, 0, 20), region("s", 10, 40, 20)];
        let t = ground_truth(&regions, &roi, TruthRule::AreaOverlap).unwrap();
        assert!(t["s_0_0"]);
        assert!(!t["s_10_40"]);
        assert!((clipped_area(&square(0.0, 0.0, 15.0, 100.0), 10.0, 40.0, 30.0, 60.0) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn parse_and_merge() {
        let text = "# slide; label; vertices\nA; tumor; 0,0 10,0 10,10\nB; tumor; 1,1 2,1 2,2\nA; tumor; 5,5 6,5 6,6 5,6\nA; til; 0,0 1,0 1,1\n";
        let rois = parse_roi_file(text).unwrap();
        assert_eq!(rois.len(), 3);
        assert_eq!(rois[0].polygons.len(), 2);
        let merged = RoiAnnotation::merged_for(&rois, "A", None).unwrap();
        assert_eq!(merged.polygons.len(), 3);
        let tumor = RoiAnnotation::merged_for(&rois, "A", Some("tumor")).unwrap();
        assert_eq!(tumor.polygons.len(), 2);
        assert!(RoiAnnotation::merged_for(&rois, "C", None).is_none());
        assert!(tumor.check_bounds(10.0, 10.0).is_ok());
        assert!(tumor.check_bounds(5.0, 10.0).is_err());

        assert!(matches!(parse_roi_file("A; t; 0,0 1,1"), Err(ClassifyError::Parse { line: 1, .. })));
        assert!(parse_roi_file("A; t").is_err());
        assert!(parse_roi_file("A; t; 0,0 1;1 2,2").is_err());
        assert!(parse_roi_file("A; t; 0,0 x,1 2,2").is_err());
    }
}
