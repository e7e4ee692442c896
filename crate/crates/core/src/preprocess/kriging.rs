use alloc::vec;
use alloc::vec::Vec;

use super::variogram::VariogramModel;
use crate::error::{Error, Result};
use crate::linalg::Lu;

const PIVOT_TOL: f64 = 1e-13;
const COINCIDENT: f64 = 1e-12;

/// Ordinary kriging with a fixed semivariogram.
///
/// The (n+1)×(n+1) system `[Γ 1; 1ᵀ 0]` is factorized once, with Γ divided
/// by the sill so the border row is on the same scale; weights and
/// leave-one-out residuals do not depend on that factor. When the system is
/// singular (coincident samples, zero sill) the scaled Γ diagonal is shifted
/// by `-1e-10`, the semivariogram analogue of a tiny nugget.
#[derive(Debug, Clone)]
pub struct OrdinaryKriging {
    points: Vec<(f64, f64)>,
    values: Vec<f64>,
    model: VariogramModel,
    scale: f64,
    lu: Lu,
    /// A⁻¹·[z; 0], the dual coefficients.
    dual: Vec<f64>,
}

impl OrdinaryKriging {
    pub fn new(samples: &[(f64, f64, f64)], model: VariogramModel) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Precondition(
                "kriging needs at least one sample".into(),
            ));
        }
        let n = samples.len();
        let points: Vec<(f64, f64)> = samples.iter().map(|s| (s.0, s.1)).collect();
        let values: Vec<f64> = samples.iter().map(|s| s.2).collect();
        let scale = if model.sill > 0.0 { model.sill } else { 1.0 };
        let build = |diag: f64| {
            let m = n + 1;
            let mut a = vec![0.0; m * m];
            for i in 0..n {
                for j in 0..n {
                    a[i * m + j] = if i == j {
                        diag
                    } else {
                        gamma(&model, points[i], points[j]) / scale
                    };
                }
                a[i * m + n] = 1.0;
                a[n * m + i] = 1.0;
            }
            a
        };
        let lu = match Lu::factor(build(0.0), n + 1, PIVOT_TOL) {
            Ok(lu) => lu,
            Err(_) => Lu::factor(build(-1e-10), n + 1, PIVOT_TOL)
                .map_err(|_| Error::Numeric("kriging system singular after jitter".into()))?,
        };
        let mut rhs = values.clone();
        rhs.push(0.0);
        let dual = lu.solve(&rhs);
        Ok(OrdinaryKriging {
            points,
            values,
            model,
            scale,
            lu,
            dual,
        })
    }

    pub fn model(&self) -> &VariogramModel {
        &self.model
    }

    fn rhs(&self, east: f64, north: f64) -> Vec<f64> {
        let mut g: Vec<f64> = self
            .points
            .iter()
            .map(|p| gamma(&self.model, *p, (east, north)) / self.scale)
            .collect();
        g.push(1.0);
        g
    }

    /// Kriging weights for a target and the Lagrange multiplier.
    pub fn weights(&self, east: f64, north: f64) -> (Vec<f64>, f64) {
        let mut sol = self.lu.solve(&self.rhs(east, north));
        let mu = sol.pop().expect("n+1 entries");
        (sol, mu)
    }

    /// Prediction via the dual form, O(n) per target.
    pub fn predict(&self, east: f64, north: f64) -> f64 {
        let n = self.points.len();
        let mut s = self.dual[n];
        for (i, p) in self.points.iter().enumerate() {
            s += self.dual[i] * gamma(&self.model, *p, (east, north)) / self.scale;
        }
        s
    }

    /// Leave-one-out residuals `zᵢ - ẑ₋ᵢ`, from the inverse of the full
    /// system without refitting.
    pub fn loo_residuals(&self) -> Vec<f64> {
        let n = self.points.len();
        if n < 2 {
            return vec![0.0; n];
        }
        let m = n + 1;
        let mut e = vec![0.0; m];
        (0..n)
            .map(|i| {
                e.iter_mut().for_each(|v| *v = 0.0);
                e[i] = 1.0;
                let col = self.lu.solve(&e);
                self.dual[i] / col[i]
            })
            .collect()
    }

    pub fn loo_rmse(&self) -> f64 {
        let r = self.loo_residuals();
        if r.is_empty() {
            return 0.0;
        }
        libm::sqrt(r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn gamma(model: &VariogramModel, a: (f64, f64), b: (f64, f64)) -> f64 {
    let d = libm::hypot(a.0 - b.0, a.1 - b.1);
    if d < COINCIDENT {
        0.0
    } else {
        model.semivariance(d)
    }
}

/// One-shot ordinary kriging prediction.
pub fn krige(
    samples: &[(f64, f64, f64)],
    model: &VariogramModel,
    east: f64,
    north: f64,
) -> Result<f64> {
    Ok(OrdinaryKriging::new(samples, *model)?.predict(east, north))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::VariogramKind;
    use crate::rng::Rng;

    fn model(kind: VariogramKind, nugget: f64) -> VariogramModel {
        VariogramModel::new(kind, nugget, nugget + 2.0, 50.0).unwrap()
    }

    fn random_samples(seed: u64, n: usize) -> Vec<(f64, f64, f64)> {
        let mut r = Rng::new(seed);
        (0..n)
            .map(|_| {
                (
                    r.uniform() * 100.0,
                    r.uniform() * 100.0,
                    r.normal() * 3.0 + 10.0,
                )
            })
            .collect()
    }

    #[test]
    fn single_sample_is_constant() {
        let k =
            OrdinaryKriging::new(&[(5.0, 5.0, 7.5)], model(VariogramKind::Spherical, 0.0)).unwrap();
        for (e, n) in [(0.0, 0.0), (5.0, 5.0), (500.0, -3.0)] {
            assert_eq!(k.predict(e, n), 7.5);
        }
    }

    #[test]
    fn equidistant_target_gives_mean() {
        for kind in VariogramKind::ALL {
            let s = [(0.0, 0.0, 4.0), (20.0, 0.0, 10.0)];
            let v = krige(&s, &model(kind, 0.1), 10.0, 7.0).unwrap();
            assert!((v - 7.0).abs() < 1e-12, "{kind}: {v}");
        }
    }

    #[test]
    fn exact_at_samples_and_weights_sum_to_one() {
        for kind in VariogramKind::ALL {
            let s = random_samples(3, 30);
            let k = OrdinaryKriging::new(&s, model(kind, 0.0)).unwrap();
            for p in &s {
                assert!((k.predict(p.0, p.1) - p.2).abs() < 1e-6);
            }
            let (w, _) = k.weights(33.0, 71.0);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn dual_form_matches_weights() {
        let s = random_samples(5, 25);
        let k = OrdinaryKriging::new(&s, model(VariogramKind::Exponential, 0.3)).unwrap();
        let (w, _) = k.weights(40.0, 60.0);
        let primal: f64 = w.iter().zip(&s).map(|(w, p)| w * p.2).sum();
        assert!((primal - k.predict(40.0, 60.0)).abs() < 1e-9);
    }

    #[test]
    fn loo_shortcut_matches_refitting() {
        let s = random_samples(9, 15);
        let m = model(VariogramKind::Gaussian, 0.5);
        let k = OrdinaryKriging::new(&s, m).unwrap();
        let fast = k.loo_residuals();
        for (i, f) in fast.iter().enumerate() {
            let mut rest = s.clone();
            let held = rest.remove(i);
            let pred = krige(&rest, &m, held.0, held.1).unwrap();
            assert!((f - (held.2 - pred)).abs() < 1e-8, "i={i}");
        }
    }

    #[test]
    fn coincident_samples_are_jittered() {
        let s = [(1.0, 1.0, 2.0), (1.0, 1.0, 4.0), (9.0, 3.0, 5.0)];
        let k = OrdinaryKriging::new(&s, model(VariogramKind::Spherical, 0.0)).unwrap();
        let v = k.predict(4.0, 2.0);
        assert!(v.is_finite());
    }

    #[test]
    fn empty_samples_rejected() {
        assert!(OrdinaryKriging::new(&[], model(VariogramKind::Spherical, 0.0)).is_err());
    }
}
