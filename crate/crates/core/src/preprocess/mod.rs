//! From raw grids and tables to model-ready samples.

mod crossfill;
mod formulas;
mod kriging;
mod matrix;
mod variogram;
mod window;

pub use crossfill::{apply_cross_fill, fit_cross_fill, fit_cross_fill_pairs, CrossFillRegression};
pub use formulas::{correct_pm25, daily_average, invert_pm25_correction, normalize_aod};
pub use kriging::{krige, OrdinaryKriging};
pub use matrix::{
    build_training_matrix, day_of_year, feature_names, feature_row, TrainingRows, FEATURE_NAMES,
};
pub use variogram::{
    empirical_variogram, fit_variogram, fit_variogram_kind, VariogramKind, VariogramModel, LAG_BINS,
};
pub use window::{extract_window, extract_window_at, WindowSample};

/// Thresholds used across preprocessing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessParams {
    /// Windows whose AOD standard deviation exceeds this are unreliable.
    pub std_threshold: f64,
    /// Relative humidity ceiling before the humidity correction, percent.
    pub rh_max: f64,
    /// Floor applied to boundary layer height before normalization, m.
    pub blh_min: f64,
    /// Minimum co-valid Aqua/Terra pairs for a gap-fill regression.
    pub min_pairs: usize,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        PreprocessParams {
            std_threshold: 0.02,
            rh_max: 99.0,
            blh_min: 50.0,
            min_pairs: 30,
        }
    }
}
