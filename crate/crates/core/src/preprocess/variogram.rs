use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::kriging::OrdinaryKriging;
use crate::error::{Error, Result};

/// Number of equal-width lag bins in the empirical semivariogram.
pub const LAG_BINS: usize = 12;
const RANGE_CANDIDATES: usize = 48;
const UNRESOLVED_SHAPE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum VariogramKind {
    Spherical,
    Exponential,
    Gaussian,
}

impl VariogramKind {
    pub const ALL: [VariogramKind; 3] = [
        VariogramKind::Spherical,
        VariogramKind::Exponential,
        VariogramKind::Gaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VariogramKind::Spherical => "spherical",
            VariogramKind::Exponential => "exponential",
            VariogramKind::Gaussian => "gaussian",
        }
    }

    /// Normalized structure function: 0 at the origin, rising to 1 at
    /// (practical) range.
    fn shape(self, h: f64, range: f64) -> f64 {
        let x = h / range;
        match self {
            VariogramKind::Spherical => {
                if x >= 1.0 {
                    1.0
                } else {
                    1.5 * x - 0.5 * x * x * x
                }
            }
            VariogramKind::Exponential => 1.0 - libm::exp(-3.0 * x),
            VariogramKind::Gaussian => 1.0 - libm::exp(-3.0 * x * x),
        }
    }
}

impl fmt::Display for VariogramKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariogramKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        VariogramKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown variogram kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariogramModel {
    pub kind: VariogramKind,
    pub nugget: f64,
    pub sill: f64,
    pub range: f64,
}

impl VariogramModel {
    pub fn new(kind: VariogramKind, nugget: f64, sill: f64, range: f64) -> Result<Self> {
        if !(nugget >= 0.0) || !(sill >= nugget) || !sill.is_finite() {
            return Err(Error::validation(
                "variogram",
                "need 0 <= nugget <= sill < inf",
            ));
        }
        if !(range > 0.0) || !range.is_finite() {
            return Err(Error::validation("variogram", "range must be positive"));
        }
        Ok(VariogramModel {
            kind,
            nugget,
            sill,
            range,
        })
    }

    pub fn partial_sill(&self) -> f64 {
        self.sill - self.nugget
    }

    /// Semivariance at lag `h`. Equals the nugget at `h = 0`; the kriging
    /// system itself uses zero on the diagonal.
    pub fn semivariance(&self, h: f64) -> f64 {
        self.nugget + self.partial_sill() * self.kind.shape(h.max(0.0), self.range)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagBin {
    /// Mean separation of the pairs in the bin.
    pub lag: f64,
    /// Mean of ½(zᵢ - zⱼ)².
    pub gamma: f64,
    pub pairs: usize,
}

fn distance(a: &(f64, f64, f64), b: &(f64, f64, f64)) -> f64 {
    libm::hypot(a.0 - b.0, a.1 - b.1)
}

/// Bin-averaged semivariogram over `LAG_BINS` equal bins up to half the
/// largest pairwise distance. Falls back to the full distance when fewer than
/// two bins would be populated.
pub fn empirical_variogram(samples: &[(f64, f64, f64)]) -> Vec<LagBin> {
    let mut max_d = 0.0f64;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            max_d = max_d.max(distance(&samples[i], &samples[j]));
        }
    }
    if max_d == 0.0 {
        return Vec::new();
    }
    let bins = bin_pairs(samples, max_d / 2.0);
    if bins.len() >= 2 {
        bins
    } else {
        bin_pairs(samples, max_d)
    }
}

fn bin_pairs(samples: &[(f64, f64, f64)], max_lag: f64) -> Vec<LagBin> {
    let width = max_lag / LAG_BINS as f64;
    let mut sum_d = [0.0f64; LAG_BINS];
    let mut sum_g = [0.0f64; LAG_BINS];
    let mut count = [0usize; LAG_BINS];
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let d = distance(&samples[i], &samples[j]);
            if d > max_lag {
                continue;
            }
            let b = ((d / width) as usize).min(LAG_BINS - 1);
            let dz = samples[i].2 - samples[j].2;
            sum_d[b] += d;
            sum_g[b] += 0.5 * dz * dz;
            count[b] += 1;
        }
    }
    (0..LAG_BINS)
        .filter(|b| count[*b] > 0)
        .map(|b| LagBin {
            lag: sum_d[b] / count[b] as f64,
            gamma: sum_g[b] / count[b] as f64,
            pairs: count[b],
        })
        .collect()
}

/// Least-squares fit of one model family to the empirical bins.
///
/// For each candidate range on a geometric ladder the semivariance is linear
/// in (nugget, partial sill), so those two are solved exactly under
/// non-negativity; the range with the smallest residual wins, ties going to
/// the shorter range.
pub fn fit_variogram_kind(bins: &[LagBin], kind: VariogramKind) -> Result<VariogramModel> {
    if bins.is_empty() {
        return Err(Error::DegenerateGeometry("no lag bins".into()));
    }
    let max_lag = bins.iter().fold(0.0f64, |m, b| m.max(b.lag));
    let min_lag = bins.iter().fold(
        f64::INFINITY,
        |m, b| if b.lag > 0.0 { m.min(b.lag) } else { m },
    );
    let lo = if min_lag.is_finite() {
        min_lag / 2.0
    } else {
        max_lag.max(1.0) / 2.0
    };
    let hi = max_lag.max(lo * 2.0);
    let ratio = libm::pow(hi / lo, 1.0 / (RANGE_CANDIDATES - 1) as f64);

    let mut best: Option<(f64, VariogramModel)> = None;
    let mut range = lo;
    for _ in 0..RANGE_CANDIDATES {
        let f: Vec<f64> = bins.iter().map(|b| kind.shape(b.lag, range)).collect();
        let (nugget, psill, sse) = nonnegative_line_fit(bins, &f);
        let model = VariogramModel {
            kind,
            nugget,
            sill: nugget + psill,
            range,
        };
        if best.is_none_or(|(s, _)| sse < s) {
            best = Some((sse, model));
        }
        range *= ratio;
    }
    let mut model = best.expect("at least one candidate").1;
    // Structure that is already saturated at the shortest observed lag cannot
    // be told apart from micro-scale variance; report it as nugget.
    if min_lag.is_finite() && kind.shape(min_lag, model.range) >= UNRESOLVED_SHAPE {
        model.nugget = model.sill;
    }
    Ok(model)
}

/// min Σ wₕ (γ - n - p·f)² subject to n, p ≥ 0, with wₕ the pair count of
/// each bin. The pure-nugget candidate is tried first so it wins ties.
fn nonnegative_line_fit(bins: &[LagBin], f: &[f64]) -> (f64, f64, f64) {
    let w: Vec<f64> = bins.iter().map(|b| b.pairs as f64).collect();
    let sw: f64 = w.iter().sum();
    let sg: f64 = bins.iter().zip(&w).map(|(b, w)| w * b.gamma).sum();
    let sf: f64 = f.iter().zip(&w).map(|(v, w)| w * v).sum();
    let sff: f64 = f.iter().zip(&w).map(|(v, w)| w * v * v).sum();
    let sfg: f64 = bins
        .iter()
        .zip(f)
        .zip(&w)
        .map(|((b, v), w)| w * b.gamma * v)
        .sum();
    let sse = |n: f64, p: f64| -> f64 {
        bins.iter()
            .zip(f)
            .zip(&w)
            .map(|((b, v), w)| {
                let e = b.gamma - n - p * v;
                w * e * e
            })
            .sum()
    };
    let mut candidates: Vec<(f64, f64)> = Vec::with_capacity(3);
    candidates.push(((sg / sw).max(0.0), 0.0));
    let det = sw * sff - sf * sf;
    if det > 1e-12 * sw * sff {
        let n = (sff * sg - sf * sfg) / det;
        let p = (sw * sfg - sf * sg) / det;
        if n >= 0.0 && p >= 0.0 {
            candidates.push((n, p));
        }
    }
    if sff > 0.0 {
        candidates.push((0.0, (sfg / sff).max(0.0)));
    }
    let mut best = (0.0, 0.0, sse(0.0, 0.0));
    for (n, p) in candidates {
        let s = sse(n, p);
        if s < best.2 {
            best = (n, p, s);
        }
    }
    best
}

/// Fits every requested family and keeps the one with the lowest
/// leave-one-out ordinary-kriging RMSE (ties go to the earlier kind).
pub fn fit_variogram(
    samples: &[(f64, f64, f64)],
    kinds: &[VariogramKind],
) -> Result<VariogramModel> {
    if samples.len() < 5 {
        return Err(Error::Precondition(format!(
            "variogram fitting needs at least 5 samples, got {}",
            samples.len()
        )));
    }
    if samples
        .iter()
        .any(|s| !(s.0.is_finite() && s.1.is_finite() && s.2.is_finite()))
    {
        return Err(Error::validation(
            "samples",
            "non-finite coordinate or value",
        ));
    }
    let mut locations: Vec<(u64, u64)> = samples
        .iter()
        .map(|s| (s.0.to_bits(), s.1.to_bits()))
        .collect();
    locations.sort_unstable();
    locations.dedup();
    if locations.len() == 1 {
        return Err(Error::DegenerateGeometry(
            "all samples are co-located".into(),
        ));
    }
    if locations.len() < 3 {
        return Err(Error::Precondition(format!(
            "variogram fitting needs at least 3 distinct locations, got {}",
            locations.len()
        )));
    }
    if kinds.is_empty() {
        return Err(Error::Precondition("no variogram kinds requested".into()));
    }
    let bins = empirical_variogram(samples);
    let mut best: Option<(f64, VariogramModel)> = None;
    let mut last_err = None;
    for &kind in kinds {
        let model = fit_variogram_kind(&bins, kind)?;
        // A family whose system is numerically singular is skipped.
        let rmse = match OrdinaryKriging::new(samples, model) {
            Ok(ok) => ok.loo_rmse(),
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        if rmse.is_finite() && best.is_none_or(|(r, _)| rmse < r) {
            best = Some((rmse, model));
        }
    }
    match (best, last_err) {
        (Some((_, m)), _) => Ok(m),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::Numeric(
            "no variogram family gave a finite cross-validation error".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use alloc::vec;

    #[test]
    fn semivariance_is_monotone_from_nugget() {
        for kind in VariogramKind::ALL {
            let m = VariogramModel::new(kind, 0.3, 1.3, 10.0).unwrap();
            assert_eq!(m.semivariance(0.0), 0.3);
            let mut prev = m.semivariance(0.0);
            for i in 1..200 {
                let g = m.semivariance(i as f64 * 0.2);
                assert!(g >= prev);
                prev = g;
            }
            assert!((m.semivariance(1e6) - 1.3).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(VariogramModel::new(VariogramKind::Spherical, -0.1, 1.0, 1.0).is_err());
        assert!(VariogramModel::new(VariogramKind::Spherical, 0.5, 0.4, 1.0).is_err());
        assert!(VariogramModel::new(VariogramKind::Spherical, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn white_noise_fits_flat_model() {
        // The first lag bin holds ~200 pairs, so its estimate carries ~10%
        // sampling error; a dip there occasionally reads as structure.
        let mut flat = 0;
        for seed in 0..20 {
            let mut rng = Rng::new(seed);
            let samples: Vec<(f64, f64, f64)> = (0..200)
                .map(|_| (rng.uniform() * 1000.0, rng.uniform() * 1000.0, rng.normal()))
                .collect();
            let m = fit_variogram(&samples, &VariogramKind::ALL).unwrap();
            assert!(m.nugget > 0.0, "seed {seed}");
            if m.sill / m.nugget <= 1.2 {
                flat += 1;
            }
        }
        assert!(flat >= 18, "{flat}/20 near-flat fits");
    }

    #[test]
    fn recovers_structured_field_range() {
        // Smooth deterministic field: long-range structure should beat a flat fit.
        let samples: Vec<(f64, f64, f64)> = (0..10)
            .flat_map(|i| (0..10).map(move |j| (i as f64 * 10.0, j as f64 * 10.0)))
            .map(|(x, y)| (x, y, libm::sin(x / 30.0) + libm::cos(y / 40.0)))
            .collect();
        let m = fit_variogram(&samples, &VariogramKind::ALL).unwrap();
        assert!(m.partial_sill() > 5.0 * m.nugget);
    }

    #[test]
    fn constant_values_give_zero_sill() {
        let samples: Vec<(f64, f64, f64)> =
            (0..6).map(|i| (i as f64, (i * i) as f64, 4.2)).collect();
        let m = fit_variogram(&samples, &VariogramKind::ALL).unwrap();
        assert_eq!(m.sill, 0.0);
        let v = OrdinaryKriging::new(&samples, m).unwrap().predict(2.5, 3.5);
        assert!((v - 4.2).abs() < 1e-9);
    }

    #[test]
    fn preconditions() {
        let two = vec![(0.0, 0.0, 1.0), (1.0, 1.0, 2.0)];
        assert!(matches!(
            fit_variogram(&two, &VariogramKind::ALL),
            Err(Error::Precondition(_))
        ));
        let same = vec![(3.0, 3.0, 1.0); 6];
        assert!(matches!(
            fit_variogram(&same, &VariogramKind::ALL),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn empirical_bins_cover_half_extent() {
        let samples: Vec<(f64, f64, f64)> = (0..20).map(|i| (i as f64, 0.0, i as f64)).collect();
        let bins = empirical_variogram(&samples);
        assert!(bins.len() <= LAG_BINS);
        assert!(bins.iter().all(|b| b.lag <= 9.5 + 1e-12));
        // Linear trend: γ(h) = h²/2.
        for b in &bins {
            assert!(b.gamma > 0.0);
        }
    }
}
