//! Raster and scalar domain types shared by every stage of the pipeline.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a semantic class in a [`ClassTable`](crate::ClassTable).
///
/// Validity against a particular table is checked where the table is known.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
#[repr(transparent)]
pub struct ClassId(pub u8);

impl ClassId {
    pub fn get(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Ordinal risk level, 0 (ideal landing zone) through 5 (direct risk of hurting people).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
#[repr(transparent)]
pub struct RiskLevel(u8);

impl RiskLevel {
    pub const COUNT: usize = 6;
    pub const MIN: RiskLevel = RiskLevel(0);
    pub const MAX: RiskLevel = RiskLevel(5);

    pub fn new(value: u8) -> Option<Self> {
        (value <= Self::MAX.0).then_some(RiskLevel(value))
    }

    /// # Panics
    /// If `value > 5`. Intended for literals.
    pub const fn from_const(value: u8) -> Self {
        assert!(value <= 5, "risk level out of range");
        RiskLevel(value)
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = RiskLevel> {
        (0..=Self::MAX.0).map(RiskLevel)
    }
}

impl TryFrom<u8> for RiskLevel {
    type Error = u8;

    fn try_from(value: u8) -> std::result::Result<Self, u8> {
        RiskLevel::new(value).ok_or(value)
    }
}

impl<'de> Deserialize<'de> for RiskLevel {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let v = u8::deserialize(de)?;
        RiskLevel::new(v).ok_or_else(|| serde::de::Error::custom(format!("risk level {v} outside 0..=5")))
    }
}

impl fmt::Display for RiskLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Row-major `width x height` grid.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Per-pixel semantic class ids, as produced by a segmentation backend.
pub type LabelMap = Raster<ClassId>;

/// Per-pixel risk levels.
pub type RiskMap = Raster<RiskLevel>;

impl<T> Raster<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 || width.checked_mul(height) != Some(data.len()) {
            return Err(Error::BadShape { width, height, len: data.len() });
        }
        Ok(Raster { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Result<Self>
    where
        T: Clone,
    {
        let len = width.checked_mul(height).ok_or(Error::BadShape { width, height, len: 0 })?;
        Self::from_vec(width, height, vec![value; len])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> Option<&T> {
        if x < self.width && y < self.height {
            self.data.get(y * self.width + x)
        } else {
            None
        }
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, T> {
        self.data.chunks_exact(self.width)
    }

    pub(crate) fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    pub(crate) fn same_shape<U>(&self, other: &Raster<U>) -> Result<()> {
        if self.dimensions() == other.dimensions() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: other.width,
                right_h: other.height,
            })
        }
    }

    /// Pointwise transform preserving dimensions.
    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Raster<U> {
        Raster { width: self.width, height: self.height, data: self.data.iter().map(f).collect() }
    }
}

impl LabelMap {
    pub fn from_ids(width: usize, height: usize, ids: &[u8]) -> Result<Self> {
        Self::from_vec(width, height, ids.iter().copied().map(ClassId).collect())
    }
}

impl RiskMap {
    /// Builds a risk map from raw level values, rejecting anything above 5.
    pub fn from_levels(width: usize, height: usize, levels: &[u8]) -> Result<Self> {
        if width == 0 || height == 0 || width.checked_mul(height) != Some(levels.len()) {
            return Err(Error::BadShape { width, height, len: levels.len() });
        }
        let data = levels
            .iter()
            .enumerate()
            .map(|(i, &v)| RiskLevel::new(v).ok_or_else(|| Error::risk_out_of_range(i % width, i / width, v)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_vec(width, height, data)
    }

    pub fn levels(&self) -> impl Iterator<Item = u8> + '_ {
        self.data.iter().map(|r| r.get())
    }
}

/// Per-pixel class scores (logits or probabilities), channel-last.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMap {
    width: usize,
    height: usize,
    channels: usize,
    scores: Vec<f32>,
}

impl ProbabilityMap {
    /// `scores` is laid out as `[y][x][channel]`.
    pub fn new(width: usize, height: usize, channels: usize, scores: Vec<f32>) -> Result<Self> {
        let expected = width.checked_mul(height).and_then(|p| p.checked_mul(channels));
        if width == 0 || height == 0 || channels == 0 || expected != Some(scores.len()) {
            return Err(Error::BadShape { width, height, len: scores.len() });
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            let pixel = i / channels;
            return Err(Error::NonFiniteScore { x: pixel % width, y: pixel / width, channel: i % channels });
        }
        Ok(ProbabilityMap { width, height, channels, scores })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let start = (y * self.width + x) * self.channels;
        &self.scores[start..start + self.channels]
    }

    pub(crate) fn pixels(&self) -> std::slice::ChunksExact<'_, f32> {
        self.scores.chunks_exact(self.channels)
    }
}
