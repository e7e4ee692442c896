//! Validity masks with a common cross-product correlation.
//!
//! Each product is valid at a pixel-day when a uniform draw falls below its
//! validity rate. With probability `c` (independently per product) the draw is
//! a shared uniform `u` (or `1 - u` for alternate products when the target
//! correlation is negative), otherwise a private one. For a pair this gives
//! correlation `c² (J - v1 v2) / (s1 s2)` where `J` is `min(v1, v2)` for the
//! shared draw and `max(0, v1 + v2 - 1)` for the antithetic one and `s` are the
//! Bernoulli standard deviations.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Whether the product at `position` uses the mirrored shared draw.
pub fn antithetic(position: usize, rho: f64) -> bool {
    rho < 0.0 && position % 2 == 1
}

fn joint(v1: f64, v2: f64, anti: bool) -> f64 {
    if anti {
        (v1 + v2 - 1.0).max(0.0)
    } else {
        v1.min(v2)
    }
}

/// Coupling probability reproducing `rho` for the given validity rates.
/// Exact for two products; the mean of the pairwise requirements otherwise.
pub fn coupling(validity: &[f64], rho: f64) -> Result<f64> {
    let mut need = Vec::new();
    for i in 0..validity.len() {
        for j in i + 1..validity.len() {
            let (a, b) = (validity[i], validity[j]);
            let sd = libm::sqrt(a * (1.0 - a) * b * (1.0 - b));
            let anti = antithetic(i, rho) != antithetic(j, rho);
            let room = joint(a, b, anti) - a * b;
            if sd == 0.0 || room == 0.0 {
                continue;
            }
            need.push(rho * sd / room);
        }
    }
    if need.is_empty() {
        return Ok(0.0);
    }
    let c2 = need.iter().sum::<f64>() / need.len() as f64;
    if c2 > 1.0 + 1e-12 {
        return Err(Error::Config(format!(
            "mask correlation {rho} is unattainable for validity rates {validity:?}"
        )));
    }
    Ok(libm::sqrt(c2.clamp(0.0, 1.0)))
}

/// Probability that at least one product is valid, for coupling `c`.
pub fn union_probability(validity: &[f64], rho: f64, c: f64) -> f64 {
    let n = validity.len();
    let mut none = 0.0;
    for pattern in 0u32..(1 << n) {
        let mut p = 1.0;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for (i, &v) in validity.iter().enumerate() {
            if pattern & (1 << i) != 0 {
                p *= c;
                if antithetic(i, rho) {
                    hi = hi.min(1.0 - v);
                } else {
                    lo = lo.max(v);
                }
            } else {
                p *= (1.0 - c) * (1.0 - v);
            }
        }
        none += p * (hi - lo).max(0.0);
    }
    1.0 - none
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_union() {
        let u = union_probability(&[0.6, 0.7], 0.0, 0.0);
        assert!((u - 0.88).abs() < 1e-12);
    }

    #[test]
    fn full_coupling_is_nested() {
        let c = coupling(&[0.5, 0.5], 1.0).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
        assert!((union_probability(&[0.5, 0.5], 1.0, c) - 0.5).abs() < 1e-12);
        let c = coupling(&[0.5, 0.5], -1.0).unwrap();
        assert!((union_probability(&[0.5, 0.5], -1.0, c) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_correlation_round_trips() {
        for &(a, b, rho) in &[(0.77, 0.76, 0.2), (0.3, 0.8, 0.1), (0.6, 0.7, -0.3)] {
            let c = coupling(&[a, b], rho).unwrap();
            let union = union_probability(&[a, b], rho, c);
            let both = a + b - union;
            let corr = (both - a * b) / libm::sqrt(a * (1.0 - a) * b * (1.0 - b));
            assert!((corr - rho).abs() < 1e-12, "{corr} vs {rho}");
        }
    }

    #[test]
    fn unattainable() {
        assert!(coupling(&[0.1, 0.9], 0.9).is_err());
    }
}
