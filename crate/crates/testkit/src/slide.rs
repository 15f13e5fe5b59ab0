use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Glass color around the tissue.
pub const BACKGROUND: [u8; 3] = [236, 234, 238];

/// Periodic patterns whose periods divide 32, so every patch cut on a grid of
/// 32 or a multiple sees the same pattern phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Texture {
    Flat,
    Stripes,
    Dots,
    Checker,
}

impl Texture {
    pub const ALL: [Texture; 4] = [Texture::Flat, Texture::Stripes, Texture::Dots, Texture::Checker];

    pub fn color(self, x: u32, y: u32) -> [u8; 3] {
        match self {
            Texture::Flat => [205, 140, 175],
            Texture::Stripes => {
                if (y / 8) % 2 == 0 {
                    [120, 60, 140]
                } else {
                    [215, 150, 185]
                }
            }
            Texture::Dots => {
                let (dx, dy) = ((x % 32) as i32 - 16, (y % 32) as i32 - 16);
                if dx * dx + dy * dy <= 36 {
                    [70, 40, 110]
                } else {
                    [222, 168, 198]
                }
            }
            Texture::Checker => {
                if ((x / 32) + (y / 32)) % 2 == 0 {
                    [150, 80, 150]
                } else {
                    [190, 120, 170]
                }
            }
        }
    }
}

fn jitter(rgb: [u8; 3], rng: &mut ChaCha8Rng, amp: i32) -> Rgb<u8> {
    Rgb(rgb.map(|c| (c as i32 + rng.random_range(-amp..=amp)).clamp(0, 255) as u8))
}

/// Square tile: background ring of width `margin` around four texture
/// quadrants (flat top-left, stripes top-right, dots bottom-left, checker
/// bottom-right). Pixel noise is uniform in ±4.
pub fn four_texture_tile(size: u32, margin: u32, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mid = size / 2;
    RgbImage::from_fn(size, size, |x, y| {
        let inside = (margin..size - margin).contains(&x) && (margin..size - margin).contains(&y);
        let rgb = if inside {
            let q = usize::from(x >= mid) + 2 * usize::from(y >= mid);
            Texture::ALL[q].color(x, y)
        } else {
            BACKGROUND
        };
        jitter(rgb, &mut rng, 4)
    })
}

/// The quadrant polygon of a texture in [`four_texture_tile`] coordinates.
pub fn quadrant_polygon(size: u32, margin: u32, texture: Texture) -> Vec<(f64, f64)> {
    let q = Texture::ALL.iter().position(|&t| t == texture).expect("known texture");
    let mid = size / 2;
    let (x0, x1) = if q % 2 == 0 { (margin, mid) } else { (mid, size - margin) };
    let (y0, y1) = if q < 2 { (margin, mid) } else { (mid, size - margin) };
    [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
        .iter()
        .map(|&(x, y)| (x as f64, y as f64))
        .collect()
}

/// Left half tissue (flat texture), right half background.
pub fn half_tissue_tile(size: u32, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RgbImage::from_fn(size, size, |x, y| {
        let rgb = if x < size / 2 { Texture::Flat.color(x, y) } else { BACKGROUND };
        jitter(rgb, &mut rng, 4)
    })
}

/// Background only, with ±3 noise.
pub fn background_tile(size: u32, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RgbImage::from_fn(size, size, |_, _| jitter(BACKGROUND, &mut rng, 3))
}

/// One slide's worth of tiles, keyed by tile origin.
pub struct SlideSpec<'a> {
    pub slide_id: &'a str,
    pub width: u32,
    pub height: u32,
    pub tiles: Vec<(u32, u32, &'a RgbImage)>,
}

/// Writes every tile as `{slide}_{x}_{y}.png` into `dir` plus a
/// `manifest.toml` listing them. Returns the manifest path.
pub fn write_manifest(dir: &Path, slides: &[SlideSpec<'_>]) -> PathBuf {
    std::fs::create_dir_all(dir).expect("create slide dir");
    let mut text = String::new();
    for s in slides {
        writeln!(text, "[[slides]]\nslide_id = \"{}\"\nwidth = {}\nheight = {}\n", s.slide_id, s.width, s.height).unwrap();
        for &(x, y, img) in &s.tiles {
            img.save(dir.join(format!("{}_{x}_{y}.png", s.slide_id))).expect("write tile");
            writeln!(text, "[[slides.tiles]]\nx = {x}\ny = {y}\n").unwrap();
        }
    }
    let path = dir.join("manifest.toml");
    std::fs::write(&path, text).expect("write manifest");
    path
}

/// ROI file text: `slide; label; x0,y0 x1,y1 ...` per polygon.
pub fn roi_line(slide_id: &str, label: &str, polygon: &[(f64, f64)]) -> String {
    let pts: Vec<String> = polygon.iter().map(|(x, y)| format!("{x},{y}")).collect();
    format!("{slide_id}; {label}; {}\n", pts.join(" "))
}

/// A single-tile four-texture slide on disk with the stripes quadrant
/// annotated as the positive region.
pub struct FourTextureSlide {
    pub manifest: PathBuf,
    pub rois: PathBuf,
    pub roi: Vec<(f64, f64)>,
    pub slide_id: String,
    pub size: u32,
    pub margin: u32,
}

pub fn four_texture_slide(dir: &Path, slide_id: &str, size: u32, margin: u32, seed: u64) -> FourTextureSlide {
    let img = four_texture_tile(size, margin, seed);
    let manifest = write_manifest(
        dir,
        &[SlideSpec {
            slide_id,
            width: size,
            height: size,
            tiles: vec![(0, 0, &img)],
        }],
    );
    let roi = quadrant_polygon(size, margin, Texture::Stripes);
    let rois = dir.join("rois.txt");
    std::fs::write(&rois, roi_line(slide_id, "tumor", &roi)).expect("write rois");
    FourTextureSlide {
        manifest,
        rois,
        roi,
        slide_id: slide_id.to_owned(),
        size,
        margin,
    }
}

/// Point-in-rectangle check for axis-aligned polygons from [`quadrant_polygon`].
pub fn in_rect(p: (f64, f64), rect: &[(f64, f64)]) -> bool {
    let xs = rect.iter().map(|v| v.0);
    let ys = rect.iter().map(|v| v.1);
    let (x0, x1) = (xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max));
    let (y0, y1) = (ys.clone().fold(f64::INFINITY, f64::min), ys.fold(f64::NEG_INFINITY, f64::max));
    (x0..=x1).contains(&p.0) && (y0..=y1).contains(&p.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(p: &Rgb<u8>) -> f64 {
        0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
    }

    #[test]
    fn textures_darker_than_background() {
        let bg = gray(&Rgb(BACKGROUND));
        for t in Texture::ALL {
            for y in 0..32 {
                for x in 0..32 {
                    assert!(gray(&Rgb(t.color(x, y))) < bg - 30.0, "{t:?}");
                }
            }
        }
    }

    #[test]
    fn quadrants() {
        let img = four_texture_tile(256, 32, 1);
        assert_eq!(img.dimensions(), (256, 256));
        let q = quadrant_polygon(256, 32, Texture::Stripes);
        assert_eq!(q[0], (128.0, 32.0));
        assert!(in_rect((200.0, 100.0), &q));
        assert!(!in_rect((100.0, 100.0), &q));
        assert_eq!(roi_line("s", "t", &[(0.0, 1.5)]), "s; t; 0,1.5\n");
    }
}
