//! Fundus image post-processing and evaluation toolkit.
//!
//! Covers the model-independent parts of a pathological-myopia pipeline:
//!
//! * [`preprocess`]: illumination correction and resampling of fundus photos.
//! * [`tiler`]: multi-scale 288×288 patch planning, overlap stitching and
//!   ensemble averaging of probability maps.
//! * [`postprocess`]: disc/atrophy fusion, the detachment area rule and
//!   fovea localization with disc-relative sanity checks.
//! * [`metrics`] and [`evaluate`]: AUC, Dice, detection F1, Euclidean
//!   distance and run-level reports.
//! * [`losses`]: forward BCE, Dice and Lovász hinge values.
//! * [`sampler`]: the decaying class-balanced sampling schedule.
//! * [`io`]: PMAP, mask PNG, CSV and statistics-config formats.

pub mod cli;
pub mod error;
pub mod evaluate;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod overlay;
pub mod postprocess;
pub mod preprocess;
pub mod raster;
pub mod sampler;
pub mod tiler;

pub use error::{Error, Result};
pub use raster::{
    area_fraction, centroid, connected_components, label_components, threshold, BinaryMask,
    BoundingBox, Component, ImageMeta, Point, ProbMap, Raster, ResolutionGroup,
};
