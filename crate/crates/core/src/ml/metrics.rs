use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// NaN when the observations have zero variance.
    pub r2: f64,
    pub rmse: f64,
    pub mae: f64,
    pub n: usize,
}

impl Metrics {
    pub fn r2_defined(&self) -> bool {
        !self.r2.is_nan()
    }
}

pub fn compute_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<Metrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::Empty("no observations to score".into()));
    }
    let n = y_true.len() as f64;
    let mean = y_true.iter().sum::<f64>() / n;
    let (mut sse, mut sae, mut sst) = (0.0, 0.0, 0.0);
    for (t, p) in y_true.iter().zip(y_pred) {
        let e = t - p;
        sse += e * e;
        sae += e.abs();
        sst += (t - mean) * (t - mean);
    }
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else { f64::NAN };
    let rmse = libm::sqrt(sse / n);
    // Guard against a last-ulp inversion of the rmse >= mae inequality.
    let mae = (sae / n).min(rmse);
    Ok(Metrics {
        r2,
        rmse,
        mae,
        n: y_true.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let m = compute_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((m.r2, m.rmse, m.mae, m.n), (1.0, 0.0, 0.0, 3));
    }

    #[test]
    fn mean_prediction_scores_zero() {
        let m = compute_metrics(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(m.r2, 0.0);
    }

    #[test]
    fn hand_worked_vector() {
        // Errors (0, 0, 0, 8): SSE 64, SST about the mean 5 is 4·25 = 100.
        let m = compute_metrics(&[0.0, 0.0, 10.0, 10.0], &[0.0, 0.0, 10.0, 2.0]).unwrap();
        assert_eq!(m.mae, 2.0);
        assert_eq!(m.rmse, 4.0);
        assert!((m.r2 - 0.36).abs() < 1e-15);
    }

    #[test]
    fn zero_variance_flags_r2() {
        let m = compute_metrics(&[3.0, 3.0], &[3.0, 4.0]).unwrap();
        assert!(!m.r2_defined());
    }

    #[test]
    fn errors() {
        assert!(compute_metrics(&[1.0], &[1.0, 2.0]).is_err());
        assert!(compute_metrics(&[], &[]).is_err());
    }
}
