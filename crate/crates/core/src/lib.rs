//! Multi-sensor aerosol optical depth (AOD) fusion for surface PM2.5
//! estimation.
//!
//! The crate is `no_std` + `alloc`. Everything here is a pure function of its
//! inputs: file formats, the command line and thread pools live in the
//! `aeromix` companion crate.
//!
//! Layout:
//!
//! * [`grid`] and [`records`] hold the data model (AOD grids with QA flags,
//!   station and meteorological records).
//! * [`preprocess`] turns raw grids and tables into samples: 3×3 window
//!   extraction, Aqua/Terra gap filling, daily averaging, humidity
//!   correction, boundary-layer normalization and ordinary kriging.
//! * [`ml`] has the regressors (gradient boosted trees, random forest,
//!   linear), metrics, splitting and k-fold grid search.
//! * [`fusion`] implements quality-weighted data-level fusion and linear
//!   stacking of per-product models across the canonical scenarios.
//! * [`mapgen`] builds quasi-stations and IDW surfaces.
//! * [`synth`] generates seeded synthetic scenes with known truth.

#![cfg_attr(not(any(test, feature = "std")), no_std)]
// Negated comparisons are used deliberately so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod exec;
pub mod fusion;
pub mod grid;
pub mod linalg;
pub mod mapgen;
pub mod ml;
pub mod preprocess;
pub mod records;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use grid::{Algorithm, AodGrid, GeoTransform, Product, ProductSet, Sensor, Source};
pub use records::{MetRecord, MetValues, SampleKey, StationRecord};

/// Calendar day used throughout.
pub type Date = chrono::NaiveDate;
