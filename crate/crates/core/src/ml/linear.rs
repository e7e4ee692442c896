use alloc::vec;
use alloc::vec::Vec;

use super::matrix::TrainingMatrix;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve};

/// Ridge added to the standardized normal matrix when it is rank-deficient.
pub const RIDGE_FALLBACK: f64 = 1e-8;

const MIN_PIVOT: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut s = self.bias;
        for (c, v) in self.coefficients.iter().zip(x) {
            s += c * v;
        }
        s
    }
}

/// Ordinary least squares with intercept on a row-major `x`.
///
/// Columns are centered and scaled to unit norm before forming the normal
/// equations. A failed Cholesky (rank deficiency) is retried with
/// [`RIDGE_FALLBACK`] on the diagonal, which tends to the minimum-norm
/// solution in the standardized basis. Constant columns get coefficient 0.
pub fn fit_linear(x: &[f64], n_features: usize, y: &[f64]) -> Result<LinearModel> {
    let n = y.len();
    if x.len() != n * n_features {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: n * n_features,
        });
    }
    if n < n_features + 1 || n == 0 {
        return Err(Error::InsufficientData {
            needed: n_features + 1,
            got: n,
        });
    }
    let a = n_features;
    let nf = n as f64;
    let y_mean = y.iter().sum::<f64>() / nf;
    let mut mean = vec![0.0; a];
    for i in 0..n {
        for j in 0..a {
            mean[j] += x[i * a + j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= nf);
    let mut z = vec![0.0; n * a];
    let mut norm = vec![0.0; a];
    for i in 0..n {
        for j in 0..a {
            let d = x[i * a + j] - mean[j];
            z[i * a + j] = d;
            norm[j] += d * d;
        }
    }
    for v in norm.iter_mut() {
        *v = libm::sqrt(*v);
    }
    let scale: Vec<f64> = norm
        .iter()
        .zip(&mean)
        .map(|(&s, &m)| {
            if s > 1e-12 * (1.0 + m.abs()) * libm::sqrt(nf) {
                s
            } else {
                0.0
            }
        })
        .collect();
    for i in 0..n {
        for j in 0..a {
            z[i * a + j] = if scale[j] > 0.0 {
                z[i * a + j] / scale[j]
            } else {
                0.0
            };
        }
    }

    let mut gram = vec![0.0; a * a];
    let mut rhs = vec![0.0; a];
    for i in 0..n {
        let row = &z[i * a..(i + 1) * a];
        let yc = y[i] - y_mean;
        for j in 0..a {
            rhs[j] += row[j] * yc;
            for k in 0..=j {
                gram[j * a + k] += row[j] * row[k];
            }
        }
    }
    for j in 0..a {
        if scale[j] == 0.0 {
            gram[j * a + j] = 1.0;
        }
        for k in 0..j {
            gram[k * a + j] = gram[j * a + k];
        }
    }
    let l = match cholesky(&gram, a, MIN_PIVOT) {
        Some(l) => l,
        None => {
            for j in 0..a {
                gram[j * a + j] += RIDGE_FALLBACK;
            }
            cholesky(&gram, a, 0.0)
                .ok_or_else(|| Error::Numeric("normal matrix not positive definite".into()))?
        }
    };
    let b = cholesky_solve(&l, a, &rhs);
    let coefficients: Vec<f64> = (0..a)
        .map(|j| if scale[j] > 0.0 { b[j] / scale[j] } else { 0.0 })
        .collect();
    let bias = y_mean
        - coefficients
            .iter()
            .zip(&mean)
            .map(|(c, m)| c * m)
            .sum::<f64>();
    if !bias.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numeric("non-finite linear coefficients".into()));
    }
    Ok(LinearModel { coefficients, bias })
}

pub fn fit_linear_matrix(m: &TrainingMatrix) -> Result<LinearModel> {
    fit_linear(m.features(), m.n_features(), m.targets())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let m = fit_linear(&[0.0, 1.0, 2.0, 3.0], 1, &[1.0, 3.0, 5.0, 7.0]).unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((m.bias - 1.0).abs() < 1e-12);
        assert!((m.predict_row(&[3.0]) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn constant_target() {
        let m = fit_linear(&[0.0, 5.0, 1.0, 2.0, 2.0, 9.0], 2, &[4.0; 3]).unwrap();
        assert!(m.coefficients.iter().all(|c| c.abs() < 1e-12));
        assert!((m.bias - 4.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_splits_weight() {
        let x: Vec<f64> = (0..10).flat_map(|i| [i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 3.0 * i as f64 + 2.0).collect();
        let m = fit_linear(&x, 2, &y).unwrap();
        assert!((m.coefficients[0] - 1.5).abs() < 1e-6);
        assert!((m.coefficients[1] - 1.5).abs() < 1e-6);
        assert!((m.predict_row(&[4.0, 4.0]) - 14.0).abs() < 1e-6);
    }

    #[test]
    fn constant_column_gets_zero() {
        let x: Vec<f64> = (0..6).flat_map(|i| [i as f64, 3.0]).collect();
        let y: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let m = fit_linear(&x, 2, &y).unwrap();
        assert_eq!(m.coefficients[1], 0.0);
        assert!((m.coefficients[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(
            fit_linear(&[1.0, 2.0], 2, &[1.0]),
            Err(Error::InsufficientData { .. })
        ));
    }
}
