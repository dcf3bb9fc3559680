//! Risk colorization, overlays and candidate annotation.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classes::Rgb;
use crate::error::{Error, Result};
use crate::slz::SlzCandidate;
use crate::types::{RiskLevel, RiskMap};

/// Default blue -> red ramp, indexed by risk level.
pub const DEFAULT_COLORMAP_JSON: &str = include_str!("../../../config/colormap.json");

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn from_bytes(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || width.checked_mul(height).and_then(|p| p.checked_mul(3)) != Some(data.len()) {
            return Err(Error::BadShape { width, height, len: data.len() });
        }
        Ok(RgbImage { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = Rgb> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    fn put(&mut self, x: usize, y: usize, c: Rgb) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&c);
    }
}

/// Six distinct colors, one per risk level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RiskColormap {
    levels: [Rgb; RiskLevel::COUNT],
}

#[derive(Serialize, Deserialize)]
struct ColormapDoc {
    levels: Vec<Rgb>,
}

impl RiskColormap {
    pub fn new(levels: [Rgb; RiskLevel::COUNT]) -> Result<Self> {
        for i in 0..levels.len() {
            for j in i + 1..levels.len() {
                if levels[i] == levels[j] {
                    return Err(Error::Colormap(format!("levels {i} and {j} share color {:?}", levels[i])));
                }
            }
        }
        Ok(RiskColormap { levels })
    }

    /// `{"levels": [[r,g,b], ...]}` with exactly six entries.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ColormapDoc = serde_json::from_str(text)?;
        let levels: [Rgb; RiskLevel::COUNT] = doc
            .levels
            .try_into()
            .map_err(|v: Vec<Rgb>| Error::Colormap(format!("expected 6 levels, got {}", v.len())))?;
        Self::new(levels)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_json(&text).map_err(|e| e.in_file(path))
    }

    pub fn color(&self, level: RiskLevel) -> Rgb {
        self.levels[level.index()]
    }

    pub fn level_of(&self, color: Rgb) -> Option<RiskLevel> {
        self.levels.iter().position(|&c| c == color).and_then(|i| RiskLevel::new(i as u8))
    }
}

impl Default for RiskColormap {
    fn default() -> Self {
        RiskColormap::from_json(DEFAULT_COLORMAP_JSON).expect("bundled colormap is valid")
    }
}

pub fn render_risk(risk: &RiskMap, cmap: &RiskColormap) -> RgbImage {
    let w = risk.width();
    let mut data = vec![0u8; risk.len() * 3];
    data.par_chunks_mut(w * 3).zip(risk.data().par_chunks(w)).for_each(|(dst, src)| {
        for (px, &r) in dst.chunks_exact_mut(3).zip(src) {
            px.copy_from_slice(&cmap.color(r));
        }
    });
    RgbImage { width: w, height: risk.height(), data }
}

/// `round_half_up((1 - alpha) * base + alpha * color)` per channel.
pub fn blend(base: u8, color: u8, alpha: f64) -> u8 {
    let v = (1.0 - alpha) * base as f64 + alpha * color as f64;
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn overlay(base: &RgbImage, risk: &RiskMap, cmap: &RiskColormap, alpha: f64) -> Result<RgbImage> {
    if (base.width, base.height) != risk.dimensions() {
        return Err(Error::DimensionMismatch {
            left_w: base.width,
            left_h: base.height,
            right_w: risk.width(),
            right_h: risk.height(),
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha {alpha} outside [0, 1]")));
    }
    let w = base.width;
    let mut data = vec![0u8; base.data.len()];
    data.par_chunks_mut(w * 3).zip(base.data.par_chunks(w * 3)).zip(risk.data().par_chunks(w)).for_each(
        |((dst, src), levels)| {
            for ((o, b), &r) in dst.chunks_exact_mut(3).zip(src.chunks_exact(3)).zip(levels) {
                let c = cmap.color(r);
                for ch in 0..3 {
                    o[ch] = blend(b[ch], c[ch], alpha);
                }
            }
        },
    );
    Ok(RgbImage { width: w, height: base.height, data })
}

const MARK_COLOR: Rgb = [255, 255, 255];
const MARK_OUTLINE: Rgb = [0, 0, 0];

/// Draws each candidate's clearance circle and a cross at its center.
pub fn annotate_candidates(image: &RgbImage, candidates: &[SlzCandidate]) -> RgbImage {
    let mut out = image.clone();
    for c in candidates {
        let [cx, cy] = c.center;
        let (fx, fy) = (cx as f64 + 0.5, cy as f64 + 0.5);
        let r = c.clearance_radius;
        // Circle: pixels whose center is within half a pixel of the radius.
        let reach = r.ceil() as usize + 1;
        for y in cy.saturating_sub(reach)..(cy + reach + 1).min(out.height) {
            for x in cx.saturating_sub(reach)..(cx + reach + 1).min(out.width) {
                let d = ((x as f64 + 0.5 - fx).powi(2) + (y as f64 + 0.5 - fy).powi(2)).sqrt();
                if (d - r).abs() <= 0.5 {
                    out.put(x, y, MARK_COLOR);
                }
            }
        }
        let arm = (r / 4.0).clamp(1.0, 6.0) as usize;
        for d in 0..=arm {
            for (x, y) in [(cx + d, cy), (cx.wrapping_sub(d), cy), (cx, cy + d), (cx, cy.wrapping_sub(d))] {
                if x < out.width && y < out.height {
                    out.put(x, y, MARK_OUTLINE);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_order_blue_to_red() {
        let c = RiskColormap::default();
        let names: Vec<Rgb> = RiskLevel::all().map(|l| c.color(l)).collect();
        assert_eq!(names, [[0, 0, 255], [0, 255, 255], [0, 255, 0], [255, 255, 0], [255, 165, 0], [255, 0, 0]]);
    }

    #[test]
    fn rejects_bad_colormaps() {
        assert!(RiskColormap::from_json(r#"{"levels": [[0,0,0]]}"#).is_err());
        let dup = r#"{"levels": [[0,0,0],[0,0,0],[1,1,1],[2,2,2],[3,3,3],[4,4,4]]}"#;
        assert!(RiskColormap::from_json(dup).unwrap_err().to_string().contains("share color"));
    }

    #[test]
    fn uniform_render() {
        let cmap = RiskColormap::default();
        let risk = RiskMap::from_levels(3, 2, &[5; 6]).unwrap();
        let img = render_risk(&risk, &cmap);
        assert!(img.pixels().all(|p| p == cmap.color(RiskLevel::MAX)));
    }

    #[test]
    fn blend_rounds_half_up() {
        assert_eq!(blend(0, 255, 0.5), 128);
        assert_eq!(blend(10, 200, 0.0), 10);
        assert_eq!(blend(10, 200, 1.0), 200);
        assert_eq!(blend(1, 2, 0.5), 2);
    }

    #[test]
    fn overlay_endpoints_and_midpoint() {
        let cmap = RiskColormap::default();
        let risk = RiskMap::from_levels(2, 1, &[5, 0]).unwrap();
        let base = RgbImage::from_bytes(2, 1, vec![0, 0, 0, 17, 99, 250]).unwrap();
        assert_eq!(overlay(&base, &risk, &cmap, 0.0).unwrap(), base);
        assert_eq!(overlay(&base, &risk, &cmap, 1.0).unwrap(), render_risk(&risk, &cmap));
        assert_eq!(overlay(&base, &risk, &cmap, 0.5).unwrap().pixel(0, 0), [128, 0, 0]);
    }

    #[test]
    fn overlay_rejects_mismatch() {
        let cmap = RiskColormap::default();
        let risk = RiskMap::from_levels(2, 1, &[5, 0]).unwrap();
        let base = RgbImage::from_bytes(1, 1, vec![0, 0, 0]).unwrap();
        assert!(matches!(overlay(&base, &risk, &cmap, 0.5), Err(Error::DimensionMismatch { .. })));
    }
}
