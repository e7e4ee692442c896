use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Least-squares line mapping one platform's AOD onto another's.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossFillRegression {
    pub slope: f64,
    pub intercept: f64,
    pub n_pairs: usize,
    /// Pearson correlation; 0 when the response is constant.
    pub r: f64,
}

/// Fits `b ≈ slope·a + intercept` over keys present in both series.
pub fn fit_cross_fill<K: Ord>(
    series_a: &BTreeMap<K, f64>,
    series_b: &BTreeMap<K, f64>,
    min_pairs: usize,
) -> Result<CrossFillRegression> {
    let pairs: Vec<(f64, f64)> = series_a
        .iter()
        .filter_map(|(k, a)| series_b.get(k).map(|b| (*a, *b)))
        .collect();
    fit_cross_fill_pairs(&pairs, min_pairs)
}

/// Same as [`fit_cross_fill`] on pre-joined `(a, b)` pairs.
pub fn fit_cross_fill_pairs(pairs: &[(f64, f64)], min_pairs: usize) -> Result<CrossFillRegression> {
    let n = pairs.len();
    if n < min_pairs.max(2) {
        return Err(Error::InsufficientData {
            needed: min_pairs.max(2),
            got: n,
        });
    }
    let first = pairs[0].0;
    if pairs.iter().all(|p| p.0 == first) {
        return Err(Error::DegeneratePredictor);
    }
    let nf = n as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(a, b) in pairs {
        let (da, db) = (a - ma, b - mb);
        sxx += da * da;
        sxy += da * db;
        syy += db * db;
    }
    if sxx == 0.0 {
        return Err(Error::DegeneratePredictor);
    }
    let slope = sxy / sxx;
    let intercept = mb - slope * ma;
    let r = if syy == 0.0 {
        0.0
    } else {
        (sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0)
    };
    Ok(CrossFillRegression {
        slope,
        intercept,
        n_pairs: n,
        r,
    })
}

/// Predicted AOD on the other platform, clamped at zero.
pub fn apply_cross_fill(reg: &CrossFillRegression, a_value: f64) -> f64 {
    (reg.slope * a_value + reg.intercept).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_line() {
        let r = fit_cross_fill_pairs(&[(0.1, 0.2), (0.2, 0.4), (0.3, 0.6)], 3).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-12);
        assert!(r.intercept.abs() < 1e-12);
        assert!((r.r - 1.0).abs() < 1e-12);
        assert_eq!(r.n_pairs, 3);
        assert!((apply_cross_fill(&r, 0.25) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn keyed_join() {
        let a: BTreeMap<u32, f64> = [(1, 0.1), (2, 0.2), (3, 0.3), (4, 0.9)]
            .into_iter()
            .collect();
        let b: BTreeMap<u32, f64> = [(1, 0.2), (2, 0.4), (3, 0.6), (5, 0.1)]
            .into_iter()
            .collect();
        let r = fit_cross_fill(&a, &b, 3).unwrap();
        assert_eq!(r.n_pairs, 3);
        assert!((r.slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_predictor_is_degenerate() {
        assert_eq!(
            fit_cross_fill_pairs(&[(0.1, 0.2), (0.1, 0.4), (0.1, 0.6)], 3),
            Err(Error::DegeneratePredictor)
        );
    }

    #[test]
    fn too_few_pairs() {
        assert_eq!(
            fit_cross_fill_pairs(&[(0.1, 0.2), (0.2, 0.4)], 30),
            Err(Error::InsufficientData { needed: 30, got: 2 })
        );
    }

    #[test]
    fn fill_is_clamped() {
        let id = CrossFillRegression {
            slope: 1.0,
            intercept: 0.0,
            n_pairs: 30,
            r: 1.0,
        };
        assert_eq!(apply_cross_fill(&id, 0.37), 0.37);
        let neg = CrossFillRegression {
            slope: 1.0,
            intercept: -0.3,
            n_pairs: 30,
            r: 1.0,
        };
        assert_eq!(apply_cross_fill(&neg, 0.1), 0.0);
    }

    proptest! {
        #[test]
        fn collinear_data_fits_exactly(
            slope in -3.0f64..3.0,
            intercept in -1.0f64..1.0,
            xs in prop::collection::vec(0.0f64..2.0, 3..40),
        ) {
            prop_assume!(xs.iter().any(|x| (x - xs[0]).abs() > 1e-3));
            prop_assume!(slope.abs() > 1e-3);
            let pairs: Vec<(f64, f64)> = xs.iter().map(|x| (*x, slope * x + intercept)).collect();
            let r = fit_cross_fill_pairs(&pairs, 3).unwrap();
            prop_assert!((r.r.abs() - 1.0).abs() < 1e-10);
            let sse: f64 = pairs.iter().map(|(a, b)| {
                let e = b - (r.slope * a + r.intercept);
                e * e
            }).sum();
            prop_assert!(sse < 1e-10);
        }

        #[test]
        fn fill_is_nonnegative(s in -5.0f64..5.0, c in -5.0f64..5.0, a in 0.0f64..5.0) {
            let reg = CrossFillRegression { slope: s, intercept: c, n_pairs: 30, r: 0.5 };
            prop_assert!(apply_cross_fill(&reg, a) >= 0.0);
        }
    }
}
