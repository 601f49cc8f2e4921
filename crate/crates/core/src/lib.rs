//! Quantification of the pleurae, airways and vessels around pulmonary
//! nodules, together with the statistics and classifiers that relate those
//! measurements to malignancy.
//!
//! Grids are indexed x-fastest; a voxel's position is its center, and the
//! grid origin is the center of voxel `(0, 0, 0)`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod annotation;
pub mod context;
pub mod error;
pub mod metaimage;
pub mod model;
pub mod morphology;
pub mod stats;
pub mod volume;

pub use annotation::{NoduleRecord, PatientDiagnosis, ProxyLabel, RadiologistRead};
pub use context::{FilterRule, NoduleContext, StructureClass, StructureFeatures};
pub use error::{Error, Result};
pub use model::{LogisticModel, RocCurve};
pub use morphology::{Branch, DistanceField, SkeletonGraph};
pub use volume::{Grid, Interpolation, Mask, Point, Spacing, SphereVoi, Volume};
