use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::records::SampleKey;
use crate::Date;

/// Feature rows with non-negative PM2.5 targets, keyed by (station, date).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMatrix {
    feature_names: Vec<String>,
    features: Vec<f64>,
    targets: Vec<f64>,
    keys: Vec<SampleKey>,
}

impl TrainingMatrix {
    pub fn new(
        feature_names: Vec<String>,
        features: Vec<f64>,
        targets: Vec<f64>,
        keys: Vec<SampleKey>,
    ) -> Result<Self> {
        let arity = feature_names.len();
        if arity == 0 {
            return Err(Error::validation(
                "features",
                "at least one feature column required",
            ));
        }
        if features.len() != targets.len() * arity {
            return Err(Error::LengthMismatch {
                left: features.len(),
                right: targets.len() * arity,
            });
        }
        if keys.len() != targets.len() {
            return Err(Error::LengthMismatch {
                left: keys.len(),
                right: targets.len(),
            });
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(
                feature_names[i % arity].clone(),
                format!("non-finite value in row {}", i / arity),
            ));
        }
        if let Some(i) = targets.iter().position(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::validation(
                "target",
                format!("row {i}: {} is not a finite value >= 0", targets[i]),
            ));
        }
        Ok(TrainingMatrix {
            feature_names,
            features,
            targets,
            keys,
        })
    }

    /// Unkeyed matrix with generic column names, for ad-hoc fits.
    pub fn from_xy(n_features: usize, features: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        let names = (0..n_features).map(|i| format!("x{i}")).collect();
        let epoch = Date::from_ymd_opt(2000, 1, 1).expect("valid date");
        let keys = (0..targets.len())
            .map(|i| SampleKey::new(format!("row{i:06}"), epoch))
            .collect();
        TrainingMatrix::new(names, features, targets, keys)
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Row-major feature block.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn keys(&self) -> &[SampleKey] {
        &self.keys
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let a = self.n_features();
        &self.features[i * a..(i + 1) * a]
    }

    /// Rows picked by index, in the given order.
    pub fn subset(&self, rows: &[usize]) -> TrainingMatrix {
        let a = self.n_features();
        let mut features = Vec::with_capacity(rows.len() * a);
        for &r in rows {
            features.extend_from_slice(self.row(r));
        }
        TrainingMatrix {
            feature_names: self.feature_names.clone(),
            features,
            targets: rows.iter().map(|&r| self.targets[r]).collect(),
            keys: rows.iter().map(|&r| self.keys[r].clone()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn validates_shape_and_values() {
        assert!(TrainingMatrix::from_xy(2, vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 2.0]).is_ok());
        assert!(TrainingMatrix::from_xy(2, vec![1.0, 2.0, 3.0], vec![1.0, 2.0]).is_err());
        assert!(TrainingMatrix::from_xy(1, vec![f64::NAN], vec![1.0]).is_err());
        assert!(TrainingMatrix::from_xy(1, vec![1.0], vec![-1.0]).is_err());
    }

    #[test]
    fn subset_preserves_rows() {
        let m = TrainingMatrix::from_xy(2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![1.0, 2.0, 3.0])
            .unwrap();
        let s = m.subset(&[2, 0]);
        assert_eq!(s.row(0), &[5.0, 6.0]);
        assert_eq!(s.targets(), &[3.0, 1.0]);
        assert_eq!(s.keys()[1], m.keys()[0]);
    }
}
