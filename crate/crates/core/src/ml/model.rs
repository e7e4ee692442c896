use alloc::vec::Vec;

use super::gbt::{fit_gbt, GbtModel, GbtParams};
use super::linear::{fit_linear_matrix, LinearModel};
use super::matrix::TrainingMatrix;
use super::rf::{fit_rf, RfModel, RfParams};
use crate::error::{Error, Result};

/// A fitted model that maps a feature row to a PM2.5 estimate.
pub trait Regressor {
    fn n_features(&self) -> usize;

    /// Prediction without an arity check.
    fn predict_row(&self, x: &[f64]) -> f64;

    fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::ArityMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        Ok(self.predict_row(x))
    }

    fn predict_matrix(&self, m: &TrainingMatrix) -> Result<Vec<f64>> {
        if m.n_features() != self.n_features() {
            return Err(Error::ArityMismatch {
                expected: self.n_features(),
                got: m.n_features(),
            });
        }
        Ok((0..m.n_rows())
            .map(|i| self.predict_row(m.row(i)))
            .collect())
    }
}

impl Regressor for GbtModel {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn predict_row(&self, x: &[f64]) -> f64 {
        GbtModel::predict_row(self, x)
    }
}

impl Regressor for RfModel {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn predict_row(&self, x: &[f64]) -> f64 {
        RfModel::predict_row(self, x)
    }
}

impl Regressor for LinearModel {
    fn n_features(&self) -> usize {
        self.coefficients.len()
    }
    fn predict_row(&self, x: &[f64]) -> f64 {
        LinearModel::predict_row(self, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelKind {
    Gbt,
    Rf,
    Linear,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gbt => "gbt",
            ModelKind::Rf => "rf",
            ModelKind::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gbt" => Some(ModelKind::Gbt),
            "rf" => Some(ModelKind::Rf),
            "linear" => Some(ModelKind::Linear),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelParams {
    Gbt(GbtParams),
    Rf(RfParams),
    Linear,
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Gbt(_) => ModelKind::Gbt,
            ModelParams::Rf(_) => ModelKind::Rf,
            ModelParams::Linear => ModelKind::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Gbt(GbtModel),
    Rf(RfModel),
    Linear(LinearModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Gbt(_) => ModelKind::Gbt,
            Model::Rf(_) => ModelKind::Rf,
            Model::Linear(_) => ModelKind::Linear,
        }
    }
}

impl Regressor for Model {
    fn n_features(&self) -> usize {
        match self {
            Model::Gbt(m) => Regressor::n_features(m),
            Model::Rf(m) => Regressor::n_features(m),
            Model::Linear(m) => Regressor::n_features(m),
        }
    }
    fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            Model::Gbt(m) => m.predict_row(x),
            Model::Rf(m) => m.predict_row(x),
            Model::Linear(m) => m.predict_row(x),
        }
    }
}

pub fn fit_model(m: &TrainingMatrix, params: &ModelParams, seed: u64) -> Result<Model> {
    Ok(match params {
        ModelParams::Gbt(p) => Model::Gbt(fit_gbt(m, p, seed)?),
        ModelParams::Rf(p) => Model::Rf(fit_rf(m, p, seed)?),
        ModelParams::Linear => Model::Linear(fit_linear_matrix(m)?),
    })
}
