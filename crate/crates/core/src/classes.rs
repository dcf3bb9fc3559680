//! Class taxonomy and the class-to-risk mapping.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ClassId, LabelMap, ProbabilityMap, Raster, RiskLevel, RiskMap};

/// Default Semantic Drone Dataset taxonomy, 24 classes.
pub const DEFAULT_CLASSES_JSON: &str = include_str!("../../../config/classes_sdd.json");

pub type Rgb = [u8; 3];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub id: ClassId,
    pub label: String,
    pub color: Rgb,
    pub risk: RiskLevel,
}

/// Validated class table: contiguous ids, distinct colors, one risk level per class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassTable {
    entries: Vec<ClassEntry>,
    by_color: HashMap<Rgb, ClassId>,
}

// Loose shape for diagnostics: lets us name the offending entry instead of
// failing inside serde with a bare type error.
#[derive(Deserialize)]
struct RawEntry {
    id: i64,
    label: String,
    color: [i64; 3],
    risk: i64,
}

impl ClassTable {
    pub fn from_entries(mut entries: Vec<ClassEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::ClassTable("no entries".into()));
        }
        if entries.len() > 256 {
            return Err(Error::ClassTable(format!("{} entries, at most 256 supported", entries.len())));
        }
        entries.sort_by_key(|e| e.id);
        for pair in entries.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::ClassTable(format!(
                    "duplicate id {} ({:?} and {:?})",
                    pair[1].id, pair[0].label, pair[1].label
                )));
            }
        }
        for (expected, entry) in entries.iter().enumerate() {
            if entry.id.index() != expected {
                return Err(Error::ClassTable(format!(
                    "non-contiguous ids: expected {expected}, found {} ({:?})",
                    entry.id, entry.label
                )));
            }
        }
        let mut by_color = HashMap::with_capacity(entries.len());
        for entry in &entries {
            if let Some(prev) = by_color.insert(entry.color, entry.id) {
                return Err(Error::ClassTable(format!(
                    "duplicate color {:?} on {} ({:?}), already used by {}",
                    entry.color, entry.id, entry.label, prev
                )));
            }
        }
        Ok(ClassTable { entries, by_color })
    }

    /// Parses and validates a JSON array of `{id, label, color, risk}` objects.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Vec<RawEntry> = serde_json::from_str(text)?;
        let mut entries = Vec::with_capacity(raw.len());
        for r in raw {
            let id = u8::try_from(r.id)
                .map_err(|_| Error::ClassTable(format!("id {} ({:?}) out of range", r.id, r.label)))?;
            let risk = u8::try_from(r.risk).ok().and_then(RiskLevel::new).ok_or_else(|| {
                Error::ClassTable(format!("risk {} on {} ({:?}) outside 0..=5", r.risk, r.id, r.label))
            })?;
            let mut color = [0u8; 3];
            for (c, v) in color.iter_mut().zip(r.color) {
                *c = u8::try_from(v).map_err(|_| {
                    Error::ClassTable(format!("color {:?} on {} ({:?}) outside 0..=255", r.color, r.id, r.label))
                })?;
            }
            entries.push(ClassEntry { id: ClassId(id), label: r.label, color, risk });
        }
        Self::from_entries(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_json(&text).map_err(|e| e.in_file(path))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("class entries serialize")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ClassEntry] {
        &self.entries
    }

    pub fn entry(&self, id: ClassId) -> Option<&ClassEntry> {
        self.entries.get(id.index())
    }

    pub fn risk_of(&self, id: ClassId) -> Option<RiskLevel> {
        self.entry(id).map(|e| e.risk)
    }

    pub fn class_of_color(&self, color: Rgb) -> Option<ClassId> {
        self.by_color.get(&color).copied()
    }

    /// The class -> risk column, indexed by class id.
    pub fn grouping(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.risk.index()).collect()
    }

    pub fn validate_labels(&self, labels: &LabelMap) -> Result<()> {
        match labels.data().iter().position(|id| id.index() >= self.len()) {
            None => Ok(()),
            Some(i) => {
                let (x, y) = labels.coords(i);
                Err(Error::InvalidClassId { x, y, id: labels.data()[i].get(), n: self.len() })
            }
        }
    }
}

impl Default for ClassTable {
    fn default() -> Self {
        ClassTable::from_json(DEFAULT_CLASSES_JSON).expect("bundled class table is valid")
    }
}

/// Pointwise class -> risk conversion.
pub fn map_class_to_risk(labels: &LabelMap, table: &ClassTable) -> Result<RiskMap> {
    let mut lut = [None; 256];
    for e in table.entries() {
        lut[e.id.index()] = Some(e.risk);
    }
    let mut out = Vec::with_capacity(labels.len());
    for (i, id) in labels.data().iter().enumerate() {
        match lut[id.index()] {
            Some(r) => out.push(r),
            None => {
                let (x, y) = labels.coords(i);
                return Err(Error::InvalidClassId { x, y, id: id.get(), n: table.len() });
            }
        }
    }
    Raster::from_vec(labels.width(), labels.height(), out)
}

/// Per-pixel argmax over class scores. Ties resolve to the lowest class id.
pub fn argmax_labels(probs: &ProbabilityMap, table: &ClassTable) -> Result<LabelMap> {
    if probs.channels() != table.len() {
        return Err(Error::ChannelMismatch { expected: table.len(), got: probs.channels() });
    }
    let ids = probs
        .pixels()
        .map(|scores| {
            let mut best = 0;
            for (c, &s) in scores.iter().enumerate().skip(1) {
                if s > scores[best] {
                    best = c;
                }
            }
            ClassId(best as u8)
        })
        .collect();
    Raster::from_vec(probs.width(), probs.height(), ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn risk_of(table: &ClassTable, id: u8) -> u8 {
        table.risk_of(ClassId(id)).unwrap().get()
    }

    #[test]
    fn default_table_grouping() {
        let t = ClassTable::default();
        assert_eq!(t.len(), 24);
        assert_eq!(t.entry(ClassId(23)).unwrap().label, "person");
        assert_eq!(risk_of(&t, 23), 5);
        assert_eq!(t.entry(ClassId(5)).unwrap().label, "paved-area");
        assert_eq!(risk_of(&t, 5), 1);
        let expected = [0, 0, 0, 0, 0, 1, 1, 2, 2, 2, 2, 2, 3, 3, 3, 3, 3, 3, 3, 3, 4, 4, 4, 5];
        assert_eq!(t.grouping(), expected.iter().map(|&r| r as usize).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_duplicate_color() {
        let doc = r#"[{"id":0,"label":"a","color":[0,0,0],"risk":0},
                      {"id":1,"label":"b","color":[0,0,0],"risk":1}]"#;
        let err = ClassTable::from_json(doc).unwrap_err().to_string();
        assert!(err.contains("duplicate color"), "{err}");
        assert!(err.contains("\"b\""), "{err}");
    }

    #[test]
    fn rejects_duplicate_id() {
        let doc = r#"[{"id":0,"label":"a","color":[0,0,0],"risk":0},
                      {"id":0,"label":"b","color":[1,0,0],"risk":1}]"#;
        let err = ClassTable::from_json(doc).unwrap_err().to_string();
        assert!(err.contains("duplicate id 0"), "{err}");
    }

    #[test]
    fn rejects_gap_in_ids() {
        let doc = r#"[{"id":0,"label":"a","color":[0,0,0],"risk":0},
                      {"id":2,"label":"c","color":[1,0,0],"risk":1}]"#;
        let err = ClassTable::from_json(doc).unwrap_err().to_string();
        assert!(err.contains("non-contiguous"), "{err}");
        assert!(err.contains("\"c\""), "{err}");
    }

    #[test]
    fn rejects_risk_out_of_range() {
        let doc = r#"[{"id":0,"label":"a","color":[0,0,0],"risk":6}]"#;
        let err = ClassTable::from_json(doc).unwrap_err().to_string();
        assert!(err.contains("risk 6"), "{err}");
        assert!(err.contains("\"a\""), "{err}");
    }

    #[test]
    fn json_round_trip() {
        let t = ClassTable::default();
        assert_eq!(ClassTable::from_json(&t.to_json()).unwrap(), t);
    }

    #[test]
    fn maps_classes_pointwise() {
        let t = ClassTable::default();
        let one = map_class_to_risk(&LabelMap::from_ids(1, 1, &[23]).unwrap(), &t).unwrap();
        assert_eq!(one.levels().collect::<Vec<_>>(), [5]);

        let quad = map_class_to_risk(&LabelMap::from_ids(2, 2, &[2, 5, 21, 12]).unwrap(), &t).unwrap();
        assert_eq!(quad.levels().collect::<Vec<_>>(), [0, 1, 4, 3]);

        let flat = map_class_to_risk(&LabelMap::from_ids(4, 3, &[0; 12]).unwrap(), &t).unwrap();
        assert!(flat.levels().all(|r| r == 0));
    }

    #[test]
    fn out_of_range_id_reports_pixel() {
        let t = ClassTable::default();
        let labels = LabelMap::from_ids(3, 2, &[0, 0, 0, 0, 30, 0]).unwrap();
        let err = map_class_to_risk(&labels, &t).unwrap_err();
        assert!(matches!(err, Error::InvalidClassId { x: 1, y: 1, id: 30, n: 24 }), "{err}");
    }

    fn two_class_table() -> ClassTable {
        ClassTable::from_json(
            r#"[{"id":0,"label":"a","color":[0,0,0],"risk":0},
                {"id":1,"label":"b","color":[9,9,9],"risk":5}]"#,
        )
        .unwrap()
    }

    #[test]
    fn argmax_examples() {
        let t = two_class_table();
        let strict = ProbabilityMap::new(1, 1, 2, vec![0.1, 0.9]).unwrap();
        assert_eq!(argmax_labels(&strict, &t).unwrap().data(), [ClassId(1)]);

        let tie = ProbabilityMap::new(1, 1, 2, vec![0.5, 0.5]).unwrap();
        assert_eq!(argmax_labels(&tie, &t).unwrap().data(), [ClassId(0)]);

        let pair = ProbabilityMap::new(2, 1, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(argmax_labels(&pair, &t).unwrap().data(), [ClassId(0), ClassId(1)]);
    }

    #[test]
    fn argmax_channel_mismatch() {
        let t = ClassTable::default();
        let p = ProbabilityMap::new(1, 1, 2, vec![0.0, 1.0]).unwrap();
        assert!(matches!(argmax_labels(&p, &t), Err(Error::ChannelMismatch { expected: 24, got: 2 })));
    }
}
