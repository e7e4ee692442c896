use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fusion::{DecisionFusionModel, DecisionVector};
use crate::grid::{GridGeometry, Product};
use crate::preprocess::{feature_row, normalize_aod};
use crate::records::MetValues;
use crate::Date;

/// A grid cell whose PM2.5 comes from the fusion model instead of a monitor.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiStation {
    pub east: f64,
    pub north: f64,
    pub date: Date,
    pub pm25: f64,
    pub source: String,
}

/// One quasi-station per covered cell center (cells where at least one
/// scenario product is available), keeping every `stride`-th row and column.
///
/// `product_aod` holds each product's daily AOD per cell (NaN = missing) and
/// `met` the kriged meteorology per cell, both row-major over `geometry`.
#[allow(clippy::too_many_arguments)]
pub fn generate_quasi_stations(
    model: &DecisionFusionModel,
    geometry: &GridGeometry,
    product_aod: &BTreeMap<Product, &[f32]>,
    met: &[MetValues],
    date: Date,
    blh_min: f64,
    stride: usize,
    source: &str,
) -> Result<Vec<QuasiStation>> {
    let n = geometry.len();
    if met.len() != n {
        return Err(Error::LengthMismatch {
            left: met.len(),
            right: n,
        });
    }
    for p in model.scenario.products.iter() {
        match product_aod.get(&p) {
            Some(v) if v.len() == n => {}
            Some(v) => {
                return Err(Error::LengthMismatch {
                    left: v.len(),
                    right: n,
                })
            }
            None => return Err(Error::MissingDecision(p)),
        }
    }
    let stride = stride.max(1);
    let mut out = Vec::new();
    for r in (0..geometry.nrows).step_by(stride) {
        for c in (0..geometry.ncols).step_by(stride) {
            let i = r * geometry.ncols + c;
            let (east, north) = geometry.cell_center(r, c);
            let mut d = DecisionVector::default();
            for p in model.scenario.products.iter() {
                let aod = product_aod[&p][i];
                if aod.is_nan() {
                    continue;
                }
                let x = feature_row(
                    normalize_aod(aod as f64, met[i].blh, blh_min),
                    east,
                    north,
                    &met[i],
                    date,
                );
                d.0.insert(p, model.decide(p, &x)?);
            }
            if d.0.is_empty() {
                continue;
            }
            if let Some(pm25) = model.apply_available(&d).filter(|v| v.is_finite()) {
                out.push(QuasiStation {
                    east,
                    north,
                    date,
                    pm25,
                    source: source.into(),
                });
            }
        }
    }
    Ok(out)
}
