//! File formats, configuration and the command-line pipeline around
//! `aeromix-core`.

// Negated comparisons are used deliberately so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agf;
pub mod bundle;
pub mod config;
pub mod error;
pub mod exec;
pub mod fsio;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod tables;

pub use config::PipelineConfig;
pub use error::{AppError, AppResult, ErrorClass};
pub use pipeline::{run, Command, Outcome};
