//! Regressors, metrics and model selection.

mod cache;
mod cv;
mod gbt;
mod linear;
mod matrix;
mod metrics;
mod model;
mod rf;
mod split;
mod tree;

pub use cache::FitCache;
pub use cv::{kfold_assign, kfold_cv, CvResult, CvRow};
pub use gbt::{fit_gbt, GbtGrid, GbtModel, GbtParams};
pub use linear::{fit_linear, fit_linear_matrix, LinearModel, RIDGE_FALLBACK};
pub use matrix::TrainingMatrix;
pub use metrics::{compute_metrics, Metrics};
pub use model::{fit_model, Model, ModelKind, ModelParams, Regressor};
pub use rf::{fit_rf, MaxFeatures, RfModel, RfParams};
pub use split::train_test_split;
pub use tree::{fit_tree, Node, RegressionTree, TreeParams};
