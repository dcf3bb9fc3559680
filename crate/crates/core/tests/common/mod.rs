//! Brute-force reference implementations. Nothing here calls into the code
//! paths it is used to check.

#![allow(dead_code)]

use landrisk::{ClassId, LabelMap, RiskLevel, RiskMap};
use rand::Rng;

/// Random label map: uniform noise or blocky patches, mixed.
pub fn random_labels(rng: &mut impl Rng, w: usize, h: usize, n: u8) -> LabelMap {
    let ids: Vec<u8> = if rng.gen_bool(0.5) {
        (0..w * h).map(|_| rng.gen_range(0..n)).collect()
    } else {
        let mut ids = vec![rng.gen_range(0..n); w * h];
        for _ in 0..rng.gen_range(0..6) {
            let c = rng.gen_range(0..n);
            let (bw, bh) = (rng.gen_range(1..=w), rng.gen_range(1..=h));
            let (x0, y0) = (rng.gen_range(0..=w - bw), rng.gen_range(0..=h - bh));
            for y in y0..y0 + bh {
                ids[y * w + x0..y * w + x0 + bw].fill(c);
            }
        }
        ids
    };
    LabelMap::from_ids(w, h, &ids).unwrap()
}

/// Copy of `gt` with a random fraction of pixels relabelled.
pub fn perturb(rng: &mut impl Rng, gt: &LabelMap, n: u8) -> LabelMap {
    let p = rng.gen_range(0.0..1.0);
    let ids: Vec<u8> = gt.data().iter().map(|c| if rng.gen_bool(p) { rng.gen_range(0..n) } else { c.get() }).collect();
    LabelMap::from_ids(gt.width(), gt.height(), &ids).unwrap()
}

pub fn random_risk(rng: &mut impl Rng, w: usize, h: usize) -> RiskMap {
    let density = rng.gen_range(0.0..0.6);
    let levels: Vec<u8> =
        (0..w * h).map(|_| if rng.gen_bool(density) { rng.gen_range(1..=5) } else { rng.gen_range(0..=1) }).collect();
    RiskMap::from_levels(w, h, &levels).unwrap()
}

pub fn ids(m: &LabelMap) -> Vec<usize> {
    m.data().iter().map(|c: &ClassId| c.index()).collect()
}

pub fn levels(m: &RiskMap) -> Vec<u8> {
    m.levels().collect()
}

/// counts[truth][pred] by direct pixel loop.
pub fn naive_confusion(pred: &[usize], gt: &[usize], n: usize) -> Vec<Vec<u64>> {
    let mut m = vec![vec![0u64; n]; n];
    for i in 0..pred.len() {
        m[gt[i]][pred[i]] += 1;
    }
    m
}

/// Intersection over union of the pixel sets {pred == k} and {gt == k}.
pub fn naive_iou(pred: &[usize], gt: &[usize], k: usize) -> Option<f64> {
    let inter = (0..pred.len()).filter(|&i| pred[i] == k && gt[i] == k).count();
    let union = (0..pred.len()).filter(|&i| pred[i] == k || gt[i] == k).count();
    (union > 0).then(|| inter as f64 / union as f64)
}

/// F1 as the harmonic mean of precision and recall.
pub fn naive_f1(pred: &[usize], gt: &[usize], k: usize) -> Option<f64> {
    let tp = (0..pred.len()).filter(|&i| pred[i] == k && gt[i] == k).count() as f64;
    let predicted = pred.iter().filter(|&&p| p == k).count() as f64;
    let actual = gt.iter().filter(|&&g| g == k).count() as f64;
    if predicted == 0.0 && actual == 0.0 {
        return None;
    }
    if tp == 0.0 {
        return Some(0.0);
    }
    let precision = tp / predicted;
    let recall = tp / actual;
    Some(2.0 * precision * recall / (precision + recall))
}

pub fn naive_accuracy(pred: &[usize], gt: &[usize]) -> f64 {
    pred.iter().zip(gt).filter(|(p, g)| p == g).count() as f64 / pred.len() as f64
}

pub fn naive_balanced_accuracy(pred: &[usize], gt: &[usize], n: usize) -> f64 {
    let mut recalls = Vec::new();
    for k in 0..n {
        let actual = gt.iter().filter(|&&g| g == k).count();
        if actual > 0 {
            let hit = (0..gt.len()).filter(|&i| gt[i] == k && pred[i] == k).count();
            recalls.push(hit as f64 / actual as f64);
        }
    }
    recalls.iter().sum::<f64>() / recalls.len() as f64
}

pub fn mean_of_defined(v: &[Option<f64>]) -> f64 {
    let d: Vec<f64> = v.iter().flatten().copied().collect();
    d.iter().sum::<f64>() / d.len() as f64
}

/// Dilation by exhaustive search over all source pixels.
pub fn naive_dilate(risk: &RiskMap, radii: [u32; 6]) -> Vec<u8> {
    let (w, h) = risk.dimensions();
    let v = levels(risk);
    let mut out = v.clone();
    for y in 0..h {
        for x in 0..w {
            for sy in 0..h {
                for sx in 0..w {
                    let l = v[sy * w + sx];
                    let cheb = x.abs_diff(sx).max(y.abs_diff(sy)) as u32;
                    if cheb <= radii[l as usize] && l > out[y * w + x] {
                        out[y * w + x] = l;
                    }
                }
            }
        }
    }
    out
}

/// Distance from pixel center to the image rectangle boundary.
pub fn naive_border(w: usize, h: usize, x: usize, y: usize) -> f64 {
    let cx = x as f64 + 0.5;
    let cy = y as f64 + 0.5;
    [cx, w as f64 - cx, cy, h as f64 - cy].into_iter().fold(f64::INFINITY, f64::min)
}

/// Clearance by exhaustive minimum over unsafe pixels and the border.
pub fn naive_distance(risk: &RiskMap, threshold: u8) -> Vec<f64> {
    let (w, h) = risk.dimensions();
    let v = levels(risk);
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            if v[y * w + x] > threshold {
                continue;
            }
            let mut best = naive_border(w, h, x, y);
            for qy in 0..h {
                for qx in 0..w {
                    if v[qy * w + qx] > threshold {
                        let dx = x.abs_diff(qx) as u64;
                        let dy = y.abs_diff(qy) as u64;
                        let d = ((dx * dx + dy * dy) as f64).sqrt();
                        if d < best {
                            best = d;
                        }
                    }
                }
            }
            out[y * w + x] = best;
        }
    }
    out
}

pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Component root per safe pixel (None for unsafe) under 4-connectivity.
pub fn naive_components(risk: &RiskMap, threshold: u8) -> Vec<Option<usize>> {
    let (w, h) = risk.dimensions();
    let v = levels(risk);
    let safe = |i: usize| v[i] <= threshold;
    let mut uf = UnionFind::new(w * h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !safe(i) {
                continue;
            }
            if x + 1 < w && safe(i + 1) {
                uf.union(i, i + 1);
            }
            if y + 1 < h && safe(i + w) {
                uf.union(i, i + w);
            }
        }
    }
    (0..w * h).map(|i| safe(i).then(|| uf.find(i))).collect()
}

pub fn risk_level(v: u8) -> RiskLevel {
    RiskLevel::new(v).unwrap()
}
