//! Safety dilation, clearance distance field and safe-region inventory.
//!
//! Pixel `(x, y)` covers the unit square `[x, x+1) x [y, y+1)` with its center at
//! `(x + 0.5, y + 0.5)`. The image border counts as unsafe for clearance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::types::{Raster, RiskLevel, RiskMap};

const BAND_ROWS: usize = 32;

/// Square (Chebyshev) dilation radius in pixels for each risk level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DilationPolicy {
    pub radius_per_level: [u32; RiskLevel::COUNT],
}

impl DilationPolicy {
    pub const IDENTITY: DilationPolicy = DilationPolicy { radius_per_level: [0; RiskLevel::COUNT] };

    pub fn new(radius_per_level: [u32; RiskLevel::COUNT]) -> Self {
        DilationPolicy { radius_per_level }
    }

    /// Same radius for every level above 0.
    pub fn uniform(radius: u32) -> Self {
        let mut r = [radius; RiskLevel::COUNT];
        r[0] = 0;
        DilationPolicy { radius_per_level: r }
    }

    pub fn radius(&self, level: RiskLevel) -> u32 {
        self.radius_per_level[level.index()]
    }

    pub fn is_identity(&self) -> bool {
        self.radius_per_level[1..].iter().all(|&r| r == 0)
    }
}

/// Grows every level's area by its radius; each pixel takes the highest level that reaches it.
pub fn dilate_risk(risk: &RiskMap, policy: &DilationPolicy) -> RiskMap {
    let (w, h) = risk.dimensions();
    let mut out: Vec<RiskLevel> = risk.data().to_vec();
    for level in RiskLevel::all().skip(1) {
        let r = policy.radius(level) as usize;
        if r == 0 || !risk.data().contains(&level) {
            continue;
        }
        // Horizontal pass: does a pixel of `level` lie within r columns?
        let mut hits = vec![0u8; w * h];
        hits.par_chunks_mut(w).zip(risk.data().par_chunks(w)).for_each(|(dst, src)| {
            let mut count = src[..r.min(w)].iter().filter(|&&v| v == level).count();
            for x in 0..w {
                if x + r < w && src[x + r] == level {
                    count += 1;
                }
                dst[x] = (count > 0) as u8;
                if x >= r && src[x - r] == level {
                    count -= 1;
                }
            }
        });
        // Vertical pass over bands of rows with a sliding column count.
        let hits = &hits;
        out.par_chunks_mut(w * BAND_ROWS).enumerate().for_each(|(band, dst)| {
            let y0 = band * BAND_ROWS;
            let mut counts = vec![0u32; w];
            for y in y0.saturating_sub(r)..(y0 + r).min(h) {
                for (c, &v) in counts.iter_mut().zip(&hits[y * w..(y + 1) * w]) {
                    *c += v as u32;
                }
            }
            for (dy, row) in dst.chunks_exact_mut(w).enumerate() {
                let y = y0 + dy;
                if y + r < h {
                    for (c, &v) in counts.iter_mut().zip(&hits[(y + r) * w..(y + r + 1) * w]) {
                        *c += v as u32;
                    }
                }
                for (o, &c) in row.iter_mut().zip(&counts) {
                    if c > 0 && *o < level {
                        *o = level;
                    }
                }
                if y >= r {
                    for (c, &v) in counts.iter_mut().zip(&hits[(y - r) * w..(y - r + 1) * w]) {
                        *c -= v as u32;
                    }
                }
            }
        });
    }
    Raster::from_vec(w, h, out).expect("dimensions preserved")
}

/// Euclidean clearance per pixel.
pub type DistanceMap = Raster<f64>;

/// Distance from the image rectangle's boundary to the center of pixel `(x, y)`.
pub fn border_distance(width: usize, height: usize, x: usize, y: usize) -> f64 {
    let dx = (x as f64 + 0.5).min(width as f64 - x as f64 - 0.5);
    let dy = (y as f64 + 0.5).min(height as f64 - y as f64 - 0.5);
    dx.min(dy)
}

/// Exact Euclidean distance from each pixel center to the nearest pixel center
/// with risk above `threshold`, capped by the distance to the image border.
/// Pixels above the threshold get 0.
pub fn distance_to_risk(risk: &RiskMap, threshold: RiskLevel) -> DistanceMap {
    let (w, h) = risk.dimensions();
    let unsafe_px: Vec<bool> = risk.data().iter().map(|&r| r > threshold).collect();

    // Column pass: squared vertical distance to the nearest unsafe pixel.
    let mut vert = vec![f64::INFINITY; w * h];
    let mut last = vec![None::<usize>; w];
    for y in 0..h {
        for x in 0..w {
            if unsafe_px[y * w + x] {
                last[x] = Some(y);
            }
            if let Some(ly) = last[x] {
                vert[y * w + x] = (y - ly) as f64;
            }
        }
    }
    last.iter_mut().for_each(|l| *l = None);
    for y in (0..h).rev() {
        for x in 0..w {
            if unsafe_px[y * w + x] {
                last[x] = Some(y);
            }
            if let Some(ly) = last[x] {
                let d = (ly - y) as f64;
                if d < vert[y * w + x] {
                    vert[y * w + x] = d;
                }
            }
        }
    }
    for v in &mut vert {
        *v *= *v;
    }

    // Row pass: lower envelope of parabolas, then cap by the border.
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).zip(vert.par_chunks(w)).enumerate().for_each(|(y, (dst, f))| {
        let mut scratch = Envelope::with_capacity(w);
        scratch.transform(f, dst);
        for (x, d) in dst.iter_mut().enumerate() {
            *d = if unsafe_px[y * w + x] { 0.0 } else { d.sqrt().min(border_distance(w, h, x, y)) };
        }
    });
    Raster::from_vec(w, h, out).expect("dimensions preserved")
}

/// 1-D squared distance transform over sampled functions (Felzenszwalb and
/// Huttenlocher). Infinite samples contribute no parabola.
struct Envelope {
    sites: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Envelope { sites: Vec::with_capacity(n), bounds: Vec::with_capacity(n + 1) }
    }

    fn transform(&mut self, f: &[f64], out: &mut [f64]) {
        self.sites.clear();
        self.bounds.clear();
        let parabola = |q: usize| f[q] + (q * q) as f64;
        for q in (0..f.len()).filter(|&q| f[q].is_finite()) {
            loop {
                let Some(&v) = self.sites.last() else {
                    self.sites.push(q);
                    self.bounds.push(f64::NEG_INFINITY);
                    break;
                };
                let s = (parabola(q) - parabola(v)) / (2.0 * (q - v) as f64);
                if s <= *self.bounds.last().unwrap() {
                    self.sites.pop();
                    self.bounds.pop();
                } else {
                    self.sites.push(q);
                    self.bounds.push(s);
                    break;
                }
            }
        }
        if self.sites.is_empty() {
            out.fill(f64::INFINITY);
            return;
        }
        let mut k = 0;
        for (x, o) in out.iter_mut().enumerate() {
            while k + 1 < self.sites.len() && self.bounds[k + 1] < x as f64 {
                k += 1;
            }
            let v = self.sites[k];
            let dx = x.abs_diff(v) as f64;
            *o = dx * dx + f[v];
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    /// First pixel in row-major order.
    pub seed: (usize, usize),
    pub area: usize,
    pub bbox: BoundingBox,
}

/// 4-connected components of the safe set, in row-major order of their seeds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Regions {
    /// Per pixel, the region index, or `None` for unsafe pixels.
    pub labels: Raster<Option<u32>>,
    pub regions: Vec<Region>,
}

impl Regions {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn pixels(&self, index: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.labels.width();
        self.labels
            .data()
            .iter()
            .enumerate()
            .filter(move |(_, l)| **l == Some(index as u32))
            .map(move |(i, _)| (i % w, i / w))
    }
}

pub fn connected_regions(risk: &RiskMap, threshold: RiskLevel) -> Regions {
    let (w, h) = risk.dimensions();
    let safe = |i: usize| risk.data()[i] <= threshold;
    let mut labels: Vec<Option<u32>> = vec![None; w * h];
    let mut regions = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if labels[start].is_some() || !safe(start) {
            continue;
        }
        let id = regions.len() as u32;
        let (sx, sy) = (start % w, start / w);
        let mut region =
            Region { seed: (sx, sy), area: 0, bbox: BoundingBox { x_min: sx, y_min: sy, x_max: sx, y_max: sy } };
        labels[start] = Some(id);
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            region.area += 1;
            let b = &mut region.bbox;
            b.x_min = b.x_min.min(x);
            b.x_max = b.x_max.max(x);
            b.y_min = b.y_min.min(y);
            b.y_max = b.y_max.max(y);
            let mut visit = |j: usize| {
                if labels[j].is_none() && safe(j) {
                    labels[j] = Some(id);
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        regions.push(region);
    }
    Regions { labels: Raster::from_vec(w, h, labels).expect("dimensions preserved"), regions }
}

/// Convenience for callers holding raw levels.
pub fn risk_threshold(value: u8) -> Result<RiskLevel> {
    RiskLevel::new(value).ok_or(crate::Error::BadThreshold(value))
}
