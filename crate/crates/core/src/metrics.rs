//! Confusion matrices and overlap metrics.
//!
//! Every metric is evaluated from integer counts. Ratios whose denominator is
//! zero are undefined (`None`) and are left out of the corresponding mean.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classes::ClassTable;
use crate::error::{Error, Result};
use crate::types::{LabelMap, Raster, RiskLevel, RiskMap};

/// `counts[i][j]` = pixels with ground truth `i` predicted as `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n: usize,
    counts: Vec<u64>,
}

const PARALLEL_MIN_PIXELS: usize = 1 << 16;

impl ConfusionMatrix {
    pub fn zeros(n: usize) -> Self {
        ConfusionMatrix { n, counts: vec![0; n * n] }
    }

    /// Row-major `n x n` counts.
    pub fn from_counts(n: usize, counts: Vec<u64>) -> Result<Self> {
        if n == 0 || counts.len() != n * n {
            return Err(Error::BadShape { width: n, height: n, len: counts.len() });
        }
        Ok(ConfusionMatrix { n, counts })
    }

    pub fn from_rows(rows: &[&[u64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::BadShape { width: n, height: n, len: rows.iter().map(|r| r.len()).sum() });
        }
        Self::from_counts(n, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.n + pred]
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.n..(truth + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.n).map(<[u64]>::to_vec).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n).map(|k| self.get(k, k)).sum()
    }

    pub fn row_sum(&self, k: usize) -> u64 {
        self.row(k).iter().sum()
    }

    pub fn col_sum(&self, k: usize) -> u64 {
        (0..self.n).map(|i| self.get(i, k)).sum()
    }

    pub fn true_positives(&self, k: usize) -> u64 {
        self.get(k, k)
    }

    pub fn false_negatives(&self, k: usize) -> u64 {
        self.row_sum(k) - self.get(k, k)
    }

    pub fn false_positives(&self, k: usize) -> u64 {
        self.col_sum(k) - self.get(k, k)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.counts[j * self.n + i] = self.get(i, j);
            }
        }
        t
    }

    /// Entrywise sum; used to aggregate over images or image bands.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.n != other.n {
            return Err(Error::BadShape { width: self.n, height: other.n, len: other.counts.len() });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Re-bins classes into groups: `counts'[g(i)][g(j)] += counts[i][j]`.
    pub fn coarsen(&self, grouping: &[usize], n_groups: usize) -> Result<ConfusionMatrix> {
        if grouping.len() < self.n {
            return Err(Error::GroupingMissing(grouping.len()));
        }
        if let Some((class, &group)) = grouping.iter().take(self.n).enumerate().find(|(_, &g)| g >= n_groups) {
            return Err(Error::GroupOutOfRange { class, group, n_groups });
        }
        let mut out = ConfusionMatrix::zeros(n_groups);
        for i in 0..self.n {
            for j in 0..self.n {
                out.counts[grouping[i] * n_groups + grouping[j]] += self.get(i, j);
            }
        }
        Ok(out)
    }

    /// Coarsens a class-level matrix onto the six risk levels of `table`.
    pub fn coarsen_to_risk(&self, table: &ClassTable) -> Result<ConfusionMatrix> {
        self.coarsen(&table.grouping(), RiskLevel::COUNT)
    }

    /// Row-percentage form. Empty rows stay all-zero.
    pub fn row_normalize(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|k| {
                let sum = self.row_sum(k);
                self.row(k).iter().map(|&c| if sum == 0 { 0.0 } else { c as f64 / sum as f64 }).collect()
            })
            .collect()
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den != 0).then(|| num as f64 / den as f64)
}

fn mean_defined(values: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Builds the confusion matrix of `pred` against `gt` over `n` classes.
pub fn confusion(pred: &LabelMap, gt: &LabelMap, n: usize) -> Result<ConfusionMatrix> {
    let ids = |m: &LabelMap| m.map(|c| c.get());
    confusion_raw(&ids(pred), &ids(gt), n)
}

/// Risk-level confusion matrix (6 x 6).
pub fn confusion_risk(pred: &RiskMap, gt: &RiskMap) -> Result<ConfusionMatrix> {
    let ids = |m: &RiskMap| m.map(|r| r.get());
    confusion_raw(&ids(pred), &ids(gt), RiskLevel::COUNT)
}

fn confusion_raw(pred: &Raster<u8>, gt: &Raster<u8>, n: usize) -> Result<ConfusionMatrix> {
    pred.same_shape(gt)?;
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    for map in [pred, gt] {
        if let Some(i) = map.data().iter().position(|&v| v as usize >= n) {
            let (x, y) = map.coords(i);
            return Err(Error::InvalidClassId { x, y, id: map.data()[i], n });
        }
    }
    let count_band = |p: &[u8], g: &[u8]| {
        let mut cm = ConfusionMatrix::zeros(n);
        for (&p, &g) in p.iter().zip(g) {
            cm.counts[g as usize * n + p as usize] += 1;
        }
        cm
    };
    if pred.len() < PARALLEL_MIN_PIXELS {
        return Ok(count_band(pred.data(), gt.data()));
    }
    let band = pred.width() * 64;
    let parts: Vec<ConfusionMatrix> =
        pred.data().par_chunks(band).zip(gt.data().par_chunks(band)).map(|(p, g)| count_band(p, g)).collect();
    let mut total = ConfusionMatrix::zeros(n);
    for part in &parts {
        total.merge(part)?;
    }
    Ok(total)
}

/// `TP / (TP + FP + FN)` per class.
pub fn iou_per_class(cm: &ConfusionMatrix) -> Vec<Option<f64>> {
    (0..cm.n())
        .map(|k| {
            let tp = cm.true_positives(k);
            ratio(tp, tp + cm.false_positives(k) + cm.false_negatives(k))
        })
        .collect()
}

pub fn mean_iou(cm: &ConfusionMatrix) -> Result<f64> {
    mean_defined(&iou_per_class(cm)).ok_or(Error::NoEvaluableClass)
}

/// Dice coefficient `2TP / (2TP + FP + FN)` per class.
pub fn f1_per_class(cm: &ConfusionMatrix) -> Vec<Option<f64>> {
    (0..cm.n())
        .map(|k| {
            let tp = cm.true_positives(k);
            ratio(2 * tp, 2 * tp + cm.false_positives(k) + cm.false_negatives(k))
        })
        .collect()
}

pub fn mean_f1(cm: &ConfusionMatrix) -> Result<f64> {
    mean_defined(&f1_per_class(cm)).ok_or(Error::NoEvaluableClass)
}

/// Micro accuracy: trace over total.
pub fn pixel_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    ratio(cm.trace(), cm.total()).ok_or(Error::EmptyMatrix)
}

/// Mean recall over classes present in the ground truth.
pub fn balanced_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let recalls: Vec<Option<f64>> = (0..cm.n()).map(|k| ratio(cm.get(k, k), cm.row_sum(k))).collect();
    mean_defined(&recalls).ok_or(Error::EmptyMatrix)
}

/// How the `pixel_accuracy` field is computed; carried in serialized reports.
pub const ACCURACY_DEFINITION: &str = "micro pixel accuracy: trace / total";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_classes: usize,
    pub per_class_iou: Vec<Option<f64>>,
    pub mean_iou: f64,
    pub per_class_f1: Vec<Option<f64>>,
    pub mean_f1: f64,
    pub pixel_accuracy: f64,
    pub balanced_accuracy: f64,
    pub confusion: Vec<Vec<u64>>,
    pub accuracy_definition: String,
}

impl MetricsReport {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self> {
        Ok(MetricsReport {
            n_classes: cm.n(),
            per_class_iou: iou_per_class(cm),
            mean_iou: mean_iou(cm)?,
            per_class_f1: f1_per_class(cm),
            mean_f1: mean_f1(cm)?,
            pixel_accuracy: pixel_accuracy(cm)?,
            balanced_accuracy: balanced_accuracy(cm)?,
            confusion: cm.rows(),
            accuracy_definition: ACCURACY_DEFINITION.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ClassId;

    const EPS: f64 = 1e-12;

    fn sample() -> ConfusionMatrix {
        let pred = LabelMap::from_ids(2, 2, &[0, 1, 1, 1]).unwrap();
        let gt = LabelMap::from_ids(2, 2, &[0, 1, 0, 1]).unwrap();
        confusion(&pred, &gt, 2).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= EPS
    }

    #[test]
    fn hand_counted_matrix() {
        assert_eq!(sample().rows(), vec![vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn perfect_prediction_is_diagonal() {
        let m = LabelMap::from_ids(3, 2, &[0, 2, 2, 1, 2, 0]).unwrap();
        let cm = confusion(&m, &m, 3).unwrap();
        assert_eq!(cm.rows(), vec![vec![2, 0, 0], vec![0, 1, 0], vec![0, 0, 3]]);
        assert_eq!(mean_iou(&cm).unwrap(), 1.0);
        assert_eq!(mean_f1(&cm).unwrap(), 1.0);
        assert_eq!(pixel_accuracy(&cm).unwrap(), 1.0);
        assert_eq!(balanced_accuracy(&cm).unwrap(), 1.0);
    }

    #[test]
    fn total_miss() {
        let pred = LabelMap::from_ids(3, 1, &[0, 0, 0]).unwrap();
        let gt = LabelMap::from_ids(3, 1, &[1, 1, 1]).unwrap();
        let cm = confusion(&pred, &gt, 2).unwrap();
        assert_eq!(cm.rows(), vec![vec![0, 0], vec![3, 0]]);
        assert_eq!(pixel_accuracy(&cm).unwrap(), 0.0);
    }

    #[test]
    fn rejects_mismatch_and_bad_ids() {
        let a = LabelMap::from_ids(2, 1, &[0, 0]).unwrap();
        let b = LabelMap::from_ids(1, 2, &[0, 0]).unwrap();
        assert!(matches!(confusion(&a, &b, 2), Err(Error::DimensionMismatch { .. })));
        let c = LabelMap::from_ids(2, 1, &[0, 2]).unwrap();
        assert!(matches!(confusion(&c, &a, 2), Err(Error::InvalidClassId { x: 1, y: 0, id: 2, n: 2 })));
    }

    #[test]
    fn sample_metrics() {
        let cm = sample();
        let iou = iou_per_class(&cm);
        assert!(close(iou[0].unwrap(), 1.0 / 2.0));
        assert!(close(iou[1].unwrap(), 2.0 / 3.0));
        assert!(close(mean_iou(&cm).unwrap(), 7.0 / 12.0));

        let f1 = f1_per_class(&cm);
        assert!(close(f1[0].unwrap(), 2.0 / 3.0));
        assert!(close(f1[1].unwrap(), 4.0 / 5.0));
        assert!(close(mean_f1(&cm).unwrap(), 11.0 / 15.0));

        assert!(close(pixel_accuracy(&cm).unwrap(), 3.0 / 4.0));
        assert!(close(balanced_accuracy(&cm).unwrap(), 3.0 / 4.0));
        assert_eq!(cm.row_normalize(), vec![vec![0.5, 0.5], vec![0.0, 1.0]]);
    }

    #[test]
    fn absent_class_is_undefined() {
        let cm = ConfusionMatrix::from_rows(&[&[2, 0, 0], &[0, 0, 0], &[1, 0, 3]]).unwrap();
        let iou = iou_per_class(&cm);
        assert_eq!(iou[1], None);
        assert!(close(mean_iou(&cm).unwrap(), (2.0 / 3.0 + 3.0 / 4.0) / 2.0));
        assert_eq!(f1_per_class(&cm)[1], None);
        assert_eq!(cm.row_normalize()[1], vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_matrix_errors() {
        let cm = ConfusionMatrix::zeros(3);
        assert!(matches!(mean_iou(&cm), Err(Error::NoEvaluableClass)));
        assert!(matches!(mean_f1(&cm), Err(Error::NoEvaluableClass)));
        assert!(matches!(pixel_accuracy(&cm), Err(Error::EmptyMatrix)));
        assert!(matches!(balanced_accuracy(&cm), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn single_class_ground_truth() {
        let cm = ConfusionMatrix::from_rows(&[&[0, 0], &[0, 5]]).unwrap();
        assert_eq!(balanced_accuracy(&cm).unwrap(), 1.0);
    }

    #[test]
    fn coarsen_identity_and_errors() {
        let cm = sample();
        assert_eq!(cm.coarsen(&[0, 1], 2).unwrap(), cm);
        let merged = cm.coarsen(&[0, 0], 1).unwrap();
        assert_eq!(merged.counts(), [4]);
        assert!(matches!(cm.coarsen(&[0], 2), Err(Error::GroupingMissing(1))));
        assert!(matches!(cm.coarsen(&[0, 3], 2), Err(Error::GroupOutOfRange { class: 1, group: 3, .. })));
    }

    #[test]
    fn coarsen_to_risk_shape() {
        let t = ClassTable::default();
        let pred = LabelMap::from_vec(2, 1, vec![ClassId(23), ClassId(2)]).unwrap();
        let gt = LabelMap::from_vec(2, 1, vec![ClassId(20), ClassId(3)]).unwrap();
        let cm = confusion(&pred, &gt, 24).unwrap().coarsen_to_risk(&t).unwrap();
        assert_eq!(cm.n(), 6);
        assert_eq!(cm.get(4, 5), 1);
        assert_eq!(cm.get(0, 0), 1);
    }

    #[test]
    fn parallel_path_matches_sequential() {
        let w = 512;
        let h = 160;
        let pred: Vec<u8> = (0..w * h).map(|i| ((i * 7) % 5) as u8).collect();
        let gt: Vec<u8> = (0..w * h).map(|i| ((i * 3 + i / w) % 5) as u8).collect();
        let pred = LabelMap::from_ids(w, h, &pred).unwrap();
        let gt = LabelMap::from_ids(w, h, &gt).unwrap();
        let par = confusion(&pred, &gt, 5).unwrap();
        let mut seq = ConfusionMatrix::zeros(5);
        for (p, g) in pred.data().iter().zip(gt.data()) {
            seq.counts[g.index() * 5 + p.index()] += 1;
        }
        assert_eq!(par, seq);
    }

    #[test]
    fn report_serializes_undefined_as_null() {
        let cm = ConfusionMatrix::from_rows(&[&[1, 0], &[0, 0]]).unwrap();
        let json = serde_json::to_value(MetricsReport::from_confusion(&cm).unwrap()).unwrap();
        assert_eq!(json["per_class_iou"][1], serde_json::Value::Null);
        assert_eq!(json["confusion"], serde_json::json!([[1, 0], [0, 0]]));
    }
}
