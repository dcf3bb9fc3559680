//! Risk maps for UAV emergency landing from semantic segmentation output.
//!
//! A per-pixel class map is converted to six ordinal risk levels (0 safest,
//! 5 riskiest), optionally dilated around hazardous areas, and searched for
//! safe landing zone candidates. The [`metrics`] module evaluates segmentation
//! quality at class and risk-level granularity from integer confusion counts.

pub mod classes;
pub mod codec;
mod error;
pub mod metrics;
pub mod morphology;
pub mod pipeline;
pub mod render;
pub mod slz;
pub mod sora;
pub mod types;

pub use classes::{argmax_labels, map_class_to_risk, ClassEntry, ClassTable, Rgb};
pub use error::{Error, Result};
pub use metrics::{
    balanced_accuracy, confusion, confusion_risk, f1_per_class, iou_per_class, mean_f1, mean_iou, pixel_accuracy,
    ConfusionMatrix, MetricsReport,
};
pub use morphology::{connected_regions, dilate_risk, distance_to_risk, DilationPolicy, DistanceMap, Region, Regions};
pub use render::{overlay, render_risk, RgbImage, RiskColormap};
pub use slz::{select_slz, SlzCandidate};
pub use sora::{grc_lookup, risk_level_description, Environment, GroundRiskClass, OperationalScenario, Visibility};
pub use types::{ClassId, LabelMap, ProbabilityMap, Raster, RiskLevel, RiskMap};

/// Version tag carried by every JSON document this crate writes.
pub const SCHEMA_VERSION: u32 = 1;
