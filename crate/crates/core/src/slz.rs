//! Safe landing zone candidates.
//!
//! One candidate per 4-connected safe region: the region pixel with the largest
//! clearance. Within a region, ties go to the lower zone mean risk, then to the
//! pixel nearest the image center, then row-major order. Candidates are ranked
//! by clearance (descending), zone mean risk (ascending), then row-major center.
//!
//! A candidate's zone is the set of pixels whose centers lie strictly inside its
//! clearance disk. Unsafe pixel centers may touch the disk boundary but never
//! fall inside it.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::morphology::{connected_regions, distance_to_risk, DistanceMap};
use crate::types::{RiskLevel, RiskMap};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlzCandidate {
    /// Pixel coordinates `[x, y]`.
    pub center: [usize; 2],
    #[serde(rename = "clearance_px")]
    pub clearance_radius: f64,
    #[serde(rename = "max_risk")]
    pub max_risk_in_zone: RiskLevel,
    #[serde(rename = "mean_risk")]
    pub mean_risk_in_zone: f64,
    /// Pixel count of the connected safe region holding the candidate.
    #[serde(rename = "area_px")]
    pub area: usize,
}

/// Row prefix sums of risk values for O(radius) disk statistics.
struct DiskStats<'a> {
    risk: &'a RiskMap,
    prefix: Vec<u64>,
}

impl<'a> DiskStats<'a> {
    fn new(risk: &'a RiskMap) -> Self {
        let w = risk.width();
        let mut prefix = Vec::with_capacity((w + 1) * risk.height());
        for row in risk.rows() {
            let mut acc = 0u64;
            prefix.push(0);
            for r in row {
                acc += r.get() as u64;
                prefix.push(acc);
            }
        }
        DiskStats { risk, prefix }
    }

    /// Column span `[lo, hi)` of pixels in row `y` whose centers lie strictly
    /// within `radius` of the center of `(cx, cy)`.
    fn span(&self, cx: usize, cy: usize, y: usize, radius: f64) -> Option<(usize, usize)> {
        let dy = y.abs_diff(cy);
        if !inside(0, dy, radius) {
            return None;
        }
        // Largest dx still inside; start from the float estimate and correct.
        let mut dx = (radius * radius - (dy * dy) as f64).max(0.0).sqrt() as usize;
        while dx > 0 && !inside(dx, dy, radius) {
            dx -= 1;
        }
        while inside(dx + 1, dy, radius) {
            dx += 1;
        }
        Some((cx.saturating_sub(dx), (cx + dx + 1).min(self.risk.width())))
    }

    fn mean(&self, cx: usize, cy: usize, radius: f64) -> f64 {
        let w = self.risk.width();
        let (mut sum, mut count) = (0u64, 0u64);
        for y in self.rows(cy, radius) {
            if let Some((lo, hi)) = self.span(cx, cy, y, radius) {
                let base = y * (w + 1);
                sum += self.prefix[base + hi] - self.prefix[base + lo];
                count += (hi - lo) as u64;
            }
        }
        sum as f64 / count.max(1) as f64
    }

    fn max(&self, cx: usize, cy: usize, radius: f64) -> RiskLevel {
        let mut best = RiskLevel::MIN;
        for y in self.rows(cy, radius) {
            if let Some((lo, hi)) = self.span(cx, cy, y, radius) {
                let row = &self.risk.data()[y * self.risk.width()..][lo..hi];
                best = row.iter().copied().fold(best, RiskLevel::max);
            }
        }
        best
    }

    fn rows(&self, cy: usize, radius: f64) -> std::ops::Range<usize> {
        let reach = radius.ceil() as usize;
        cy.saturating_sub(reach)..(cy + reach + 1).min(self.risk.height())
    }
}

/// Whether a pixel center at integer offset `(dx, dy)` lies strictly inside
/// the disk. Clearances are square roots of integers (or border half-integers),
/// so comparing square roots keeps tangent pixels out.
fn inside(dx: usize, dy: usize, radius: f64) -> bool {
    (((dx * dx + dy * dy) as u64) as f64).sqrt() < radius
}

fn center_offset(w: usize, h: usize, x: usize, y: usize) -> f64 {
    let dx = x as f64 + 0.5 - w as f64 / 2.0;
    let dy = y as f64 + 0.5 - h as f64 / 2.0;
    dx * dx + dy * dy
}

/// Up to `k` ranked landing candidates among pixels with risk `<= threshold`.
pub fn select_slz(risk: &RiskMap, threshold: RiskLevel, k: usize) -> Vec<SlzCandidate> {
    let dist = distance_to_risk(risk, threshold);
    select_slz_with_distance(risk, &dist, threshold, k)
}

/// As [`select_slz`], reusing a distance map computed for the same threshold.
pub fn select_slz_with_distance(
    risk: &RiskMap,
    dist: &DistanceMap,
    threshold: RiskLevel,
    k: usize,
) -> Vec<SlzCandidate> {
    let (w, h) = risk.dimensions();
    let regions = connected_regions(risk, threshold);
    if regions.is_empty() || k == 0 {
        return Vec::new();
    }
    let stats = DiskStats::new(risk);

    // Maximum clearance per region.
    let mut peak = vec![0.0f64; regions.len()];
    for (i, label) in regions.labels.data().iter().enumerate() {
        if let Some(id) = label {
            let d = dist.data()[i];
            if d > peak[*id as usize] {
                peak[*id as usize] = d;
            }
        }
    }

    // Among each region's maximizers, keep the best by (mean risk, center offset, row-major).
    let mut best: Vec<Option<(f64, f64, usize)>> = vec![None; regions.len()];
    for (i, label) in regions.labels.data().iter().enumerate() {
        let Some(id) = label else { continue };
        let id = *id as usize;
        if dist.data()[i] != peak[id] {
            continue;
        }
        let (x, y) = (i % w, i / w);
        let key = (stats.mean(x, y, peak[id]), center_offset(w, h, x, y), i);
        let better = match &best[id] {
            None => true,
            Some(cur) => {
                key.0.total_cmp(&cur.0).then(key.1.total_cmp(&cur.1)).then(key.2.cmp(&cur.2)) == Ordering::Less
            }
        };
        if better {
            best[id] = Some(key);
        }
    }

    let mut candidates: Vec<SlzCandidate> = best
        .iter()
        .zip(&regions.regions)
        .zip(&peak)
        .filter_map(|((b, region), &clearance)| {
            let (mean, _, i) = (*b)?;
            let (x, y) = (i % w, i / w);
            Some(SlzCandidate {
                center: [x, y],
                clearance_radius: clearance,
                max_risk_in_zone: stats.max(x, y, clearance),
                mean_risk_in_zone: mean,
                area: region.area,
            })
        })
        .collect();

    candidates.sort_by(|a, b| {
        b.clearance_radius
            .total_cmp(&a.clearance_radius)
            .then(a.mean_risk_in_zone.total_cmp(&b.mean_risk_in_zone))
            .then((a.center[1], a.center[0]).cmp(&(b.center[1], b.center[0])))
    });
    candidates.truncate(k);
    candidates
}
