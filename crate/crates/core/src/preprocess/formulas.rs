use alloc::format;

use super::crossfill::{apply_cross_fill, CrossFillRegression};
use crate::error::{Error, Result};

/// Daily MODIS AOD from the Aqua and Terra retrievals.
///
/// Both present: arithmetic mean. One present: the other platform is
/// predicted with the matching regression first (`reg_a2t` maps Aqua onto
/// Terra, `reg_t2a` the reverse). Returns `None` when neither is present or
/// the required regression is unavailable.
pub fn daily_average(
    aod_aqua: Option<f64>,
    aod_terra: Option<f64>,
    reg_a2t: Option<&CrossFillRegression>,
    reg_t2a: Option<&CrossFillRegression>,
) -> Option<f64> {
    let (aqua, terra) = match (aod_aqua, aod_terra) {
        (Some(a), Some(t)) => (a, t),
        (Some(a), None) => (a, apply_cross_fill(reg_a2t?, a)),
        (None, Some(t)) => (apply_cross_fill(reg_t2a?, t), t),
        (None, None) => return None,
    };
    Some((aqua + terra) / 2.0)
}

/// Humidity correction of dry-mass PM2.5: `pm / (1 - rh/100)`, with `rh`
/// clamped to `[0, rh_max]`.
pub fn correct_pm25(pm: f64, rh: f64, rh_max: f64) -> Result<f64> {
    if !(pm >= 0.0) || !pm.is_finite() {
        return Err(Error::validation(
            "pm25",
            format!("{pm} must be finite and >= 0"),
        ));
    }
    let rh = rh.clamp(0.0, rh_max);
    Ok(pm / (1.0 - rh / 100.0))
}

/// Inverse of [`correct_pm25`] for the same clamped humidity.
pub fn invert_pm25_correction(pm_corrected: f64, rh: f64, rh_max: f64) -> f64 {
    let rh = rh.clamp(0.0, rh_max);
    pm_corrected * (1.0 - rh / 100.0)
}

/// Column AOD per meter of boundary layer, with the height floored at `blh_min`.
pub fn normalize_aod(aod: f64, blh: f64, blh_min: f64) -> f64 {
    aod / blh.max(blh_min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn daily_average_examples() {
        assert_eq!(daily_average(Some(0.4), Some(0.6), None, None), Some(0.5));
        assert_eq!(
            daily_average(Some(0.37), Some(0.37), None, None),
            Some(0.37)
        );
        let reg = CrossFillRegression {
            slope: 2.0,
            intercept: 0.0,
            n_pairs: 30,
            r: 1.0,
        };
        assert_eq!(
            daily_average(Some(0.25), None, Some(&reg), None),
            Some(0.375)
        );
        assert_eq!(
            daily_average(None, Some(0.25), None, Some(&reg)),
            Some(0.375)
        );
        assert_eq!(daily_average(Some(0.25), None, None, Some(&reg)), None);
        assert_eq!(daily_average(None, None, Some(&reg), Some(&reg)), None);
    }

    #[test]
    fn humidity_correction_examples() {
        assert_eq!(correct_pm25(30.0, 0.0, 99.0).unwrap(), 30.0);
        assert_eq!(correct_pm25(50.0, 50.0, 99.0).unwrap(), 100.0);
        let c = correct_pm25(40.0, 100.0, 99.0).unwrap();
        assert!((c - 4000.0).abs() / 4000.0 < 1e-12);
        assert!(correct_pm25(-1.0, 10.0, 99.0).is_err());
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_aod(0.5, 1000.0, 50.0), 5.0e-4);
        assert_eq!(normalize_aod(0.0, 731.0, 50.0), 0.0);
        assert_eq!(normalize_aod(0.5, 10.0, 50.0), 0.01);
    }

    proptest! {
        #[test]
        fn correction_is_increasing_in_rh(pm in 0.1f64..500.0, a in 0.0f64..99.0, b in 0.0f64..99.0) {
            prop_assume!(a < b);
            let ca = correct_pm25(pm, a, 99.0).unwrap();
            let cb = correct_pm25(pm, b, 99.0).unwrap();
            prop_assert!(ca < cb);
            prop_assert!(ca >= pm);
        }

        #[test]
        fn correction_round_trips(pm in 0.0f64..500.0, rh in 0.0f64..100.0) {
            let c = correct_pm25(invert_pm25_correction(pm, rh, 99.0), rh, 99.0).unwrap();
            prop_assert!((c - pm).abs() <= 1e-9 * pm.max(1.0));
        }

        #[test]
        fn daily_average_is_between_inputs(a in 0.0f64..5.0, t in 0.0f64..5.0) {
            let m = daily_average(Some(a), Some(t), None, None).unwrap();
            prop_assert!(m >= a.min(t) && m <= a.max(t));
        }
    }
}
