//! Seeded synthetic scenes with known truth.
//!
//! A scene has a smooth true AOD field per day, degraded copies for each
//! configured product (bias, spatially smooth noise, correlated validity
//! masks, QA codes tied to the noise magnitude), smooth meteorology sampled
//! on a coarse lattice, and station PM2.5 generated from the truth.

mod field;
mod mask;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use field::{blur_radius, gaussian_field};
pub use mask::{coupling, union_probability};

use crate::error::{Error, Result};
use crate::grid::{geometry, AodGrid, GridGeometry, Product, ProductSet, Source, DEFAULT_NODATA};
use crate::preprocess::invert_pm25_correction;
use crate::records::{MetRecord, MetValues, StationRecord};
use crate::rng::{normal_quantile, Rng};
use crate::Date;

/// Degradation applied to the truth for one product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Degradation {
    /// Additive AOD bias.
    pub bias: f64,
    /// Standard deviation of the additive AOD noise.
    pub noise_sd: f64,
    /// Probability that a pixel-day is retrieved.
    pub validity: f64,
    /// Fraction of retrieved pixels flagged QA 3; those with the smallest
    /// absolute noise get the flag.
    pub qa_fidelity: f64,
}

impl Degradation {
    pub const NONE: Degradation = Degradation {
        bias: 0.0,
        noise_sd: 0.0,
        validity: 1.0,
        qa_fidelity: 1.0,
    };
}

/// Mean and spread of one meteorological variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetField {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetParams {
    /// Lattice step of the met records, in cells.
    pub spacing: usize,
    /// Kernel standard deviation of the met fields, m.
    pub correlation_length: f64,
    /// Per variable, in [`MetValues::NAMES`] order.
    pub fields: [MetField; MetValues::COUNT],
}

impl Default for MetParams {
    fn default() -> Self {
        let f = |mean, sd| MetField { mean, sd };
        MetParams {
            spacing: 10,
            correlation_length: 25_000.0,
            fields: [
                f(275.0, 4.0),
                f(290.0, 5.0),
                f(900.0, 150.0),
                f(87_000.0, 400.0),
                f(1.2, 0.3),
                f(1.8, 0.3),
                f(3.0, 1.0),
                f(core::f64::consts::PI, 1.0),
                f(3.0e6, 4.0e5),
                f(4.0e5, 5.0e4),
                f(45.0, 12.0),
            ],
        }
    }
}

/// PM2.5 = intercept + aod·x + rh·RH + t·(T − 273.15) +
/// interaction·x·RH/(100 − min(RH, rh_max)) + quadratic·x² + noise, with x
/// the true AOD per km of boundary layer. The humidity growth factor makes
/// the AOD×RH interaction strongly nonlinear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetParams {
    pub intercept: f64,
    pub aod: f64,
    pub rh: f64,
    pub t: f64,
    pub interaction: f64,
    pub quadratic: f64,
    pub noise_sd: f64,
    /// Humidity ceiling used when back-computing the dry-mass reading.
    pub rh_max: f64,
    /// Boundary layer floor, m.
    pub blh_min: f64,
}

impl Default for TargetParams {
    fn default() -> Self {
        TargetParams {
            intercept: 8.0,
            aod: 40.0,
            rh: 0.15,
            t: 0.3,
            interaction: 25.0,
            quadratic: 15.0,
            noise_sd: 1.0,
            rh_max: 99.0,
            blh_min: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub geometry: GridGeometry,
    pub start: Date,
    pub n_days: usize,
    pub n_stations: usize,
    /// Kernel standard deviation of the true AOD field, m.
    pub correlation_length: f64,
    pub aod_mean: f64,
    pub aod_sd: f64,
    /// Kernel standard deviation of the product noise fields, m.
    pub noise_correlation_length: f64,
    pub products: BTreeMap<Product, Degradation>,
    /// Target correlation between any two products' validity masks.
    pub mask_correlation: f64,
    /// Share of retrieved MODIS pixel-days seen by both Aqua and Terra; the
    /// rest is split evenly between the platforms.
    pub modis_overlap: f64,
    pub met: MetParams,
    pub target: TargetParams,
    pub seed: u64,
}

impl SceneConfig {
    /// A 100 × 100 km scene over 60 days with all four products.
    pub fn new(seed: u64) -> Self {
        let d = |bias, noise_sd, validity| Degradation {
            bias,
            noise_sd,
            validity,
            qa_fidelity: 1.0,
        };
        SceneConfig {
            geometry: geometry(100, 100, 500_000.0, 3_900_000.0, 1000.0),
            start: Date::from_ymd_opt(2020, 1, 1).expect("valid date"),
            n_days: 60,
            n_stations: 21,
            correlation_length: 20_000.0,
            aod_mean: 0.3,
            aod_sd: 0.1,
            noise_correlation_length: 10_000.0,
            products: [
                (Product::Mdb, d(0.02, 0.05, 0.77)),
                (Product::Mdt, d(0.01, 0.06, 0.70)),
                (Product::Vdb, d(0.0, 0.06, 0.72)),
                (Product::Vdt, d(-0.03, 0.08, 0.76)),
            ]
            .into_iter()
            .collect(),
            mask_correlation: 0.2,
            modis_overlap: 0.5,
            met: MetParams::default(),
            target: TargetParams::default(),
            seed,
        }
    }

    pub fn product_set(&self) -> ProductSet {
        let mut s = ProductSet::EMPTY;
        for p in self.products.keys() {
            s.insert(*p);
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| Err(Error::Config(format!("{field}: {reason}")));
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if self.geometry.is_empty() {
            return bad("geometry", "empty grid");
        }
        if self.n_days == 0 {
            return bad("n_days", "must be positive");
        }
        if self.n_stations == 0 {
            return bad("n_stations", "must be positive");
        }
        if !pos(self.correlation_length)
            || !pos(self.noise_correlation_length)
            || !pos(self.met.correlation_length)
        {
            return bad("correlation_length", "must be positive and finite");
        }
        if !(self.aod_mean >= 0.0
            && self.aod_mean.is_finite()
            && self.aod_sd >= 0.0
            && self.aod_sd.is_finite())
        {
            return bad("aod", "mean and sd must be finite and >= 0");
        }
        if self.products.is_empty() {
            return bad("products", "at least one product is required");
        }
        for (p, d) in &self.products {
            if !(d.bias.is_finite() && d.noise_sd >= 0.0 && d.noise_sd.is_finite()) {
                return bad(p.code(), "bias and noise sd must be finite, noise sd >= 0");
            }
            if !unit(d.validity) || !unit(d.qa_fidelity) {
                return bad(p.code(), "validity and QA fidelity must lie in [0, 1]");
            }
        }
        if !(-1.0..=1.0).contains(&self.mask_correlation) {
            return bad("mask_correlation", "must lie in [-1, 1]");
        }
        if !unit(self.modis_overlap) {
            return bad("modis_overlap", "must lie in [0, 1]");
        }
        if self.met.spacing == 0 {
            return bad("met_spacing", "must be positive");
        }
        if self
            .met
            .fields
            .iter()
            .any(|f| !(f.mean.is_finite() && f.sd >= 0.0 && f.sd.is_finite()))
        {
            return bad("met", "means must be finite, spreads >= 0");
        }
        let t = &self.target;
        let coefs = [t.intercept, t.aod, t.rh, t.t, t.interaction, t.quadratic];
        if coefs.iter().any(|c| !c.is_finite()) || !(t.noise_sd >= 0.0 && t.noise_sd.is_finite()) {
            return bad("target", "coefficients must be finite, noise sd >= 0");
        }
        if !(t.rh_max > 0.0 && t.rh_max < 100.0) || !pos(t.blh_min) {
            return bad(
                "target",
                "rh_max must lie in (0, 100) and blh_min be positive",
            );
        }
        self.coupling()?;
        Ok(())
    }

    fn validities(&self) -> Vec<f64> {
        self.products.values().map(|d| d.validity).collect()
    }

    /// Probability of the shared mask draw.
    pub fn coupling(&self) -> Result<f64> {
        coupling(&self.validities(), self.mask_correlation)
    }

    /// Expected percentage of pixel-days where at least one of `products`
    /// is retrieved.
    pub fn analytic_union_coverage(&self, products: ProductSet) -> Result<f64> {
        let c = self.coupling()?;
        // Products outside the subset are never valid.
        let v: Vec<f64> = self
            .products
            .iter()
            .map(|(p, d)| {
                if products.contains(*p) {
                    d.validity
                } else {
                    0.0
                }
            })
            .collect();
        Ok(100.0 * union_probability(&v, self.mask_correlation, c))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub geometry: GridGeometry,
    pub dates: Vec<Date>,
    /// True AOD per day, row-major.
    pub truth: Vec<Vec<f32>>,
    /// One grid per (source, day) for the configured products.
    pub grids: Vec<AodGrid>,
    pub met: Vec<MetRecord>,
    /// Station records sorted by id then date.
    pub stations: Vec<StationRecord>,
    /// Noise-free humidity-corrected PM2.5 behind each station record.
    pub pm25_true: Vec<f64>,
    /// Product-level validity per pixel-day, day-major.
    pub masks: BTreeMap<Product, Vec<bool>>,
}

impl Scene {
    pub fn mask_coverage(&self, products: ProductSet) -> f64 {
        let n = self.dates.len() * self.geometry.len();
        let hit = (0..n)
            .filter(|&i| {
                products
                    .iter()
                    .any(|p| self.masks.get(&p).is_some_and(|m| m[i]))
            })
            .count();
        100.0 * hit as f64 / n as f64
    }
}

const STREAM_TRUTH: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_MASK: u64 = 3;
const STREAM_MET: u64 = 4;
const STREAM_STATIONS: u64 = 5;
const STREAM_TARGET: u64 = 6;

fn stream(seed: u64, kind: u64, day: usize, item: usize) -> Rng {
    Rng::derived(seed, (kind << 48) | ((day as u64) << 16) | item as u64)
}

fn target_pm25(t: &TargetParams, aod: f64, met: &MetValues, noise: f64) -> f64 {
    let x = aod / met.blh.max(t.blh_min) * 1000.0;
    let v = t.intercept
        + t.aod * x
        + t.rh * met.rh
        + t.t * (met.t - 273.15)
        + t.interaction * x * met.rh / (100.0 - met.rh.min(t.rh_max))
        + t.quadratic * x * x
        + noise;
    v.max(0.0)
}

fn met_at(fields: &[Vec<f64>], params: &MetParams, i: usize) -> MetValues {
    let mut a = [0.0; MetValues::COUNT];
    for (v, slot) in a.iter_mut().enumerate() {
        *slot = params.fields[v].mean + params.fields[v].sd * fields[v][i];
    }
    let mut m = MetValues::from_array(a);
    m.blh = m.blh.max(100.0);
    m.rh = m.rh.clamp(0.0, 100.0);
    m.ws = m.ws.max(0.0);
    m.wd = m.wd.rem_euclid(2.0 * core::f64::consts::PI);
    m.lai_hv = m.lai_hv.max(0.0);
    m.lai_lv = m.lai_lv.max(0.0);
    m.cdir = m.cdir.max(0.0);
    m.uvb = m.uvb.max(0.0);
    m
}

/// Generates a scene. Every draw comes from a stream keyed by (purpose, day,
/// item), so the output is a pure function of the config.
pub fn generate_scene(config: &SceneConfig) -> Result<Scene> {
    config.validate()?;
    let g = config.geometry;
    let cells = g.len();
    let cs = g.transform.cellsize;
    let seed = config.seed;
    let products: Vec<(Product, Degradation)> =
        config.products.iter().map(|(p, d)| (*p, *d)).collect();
    let c = config.coupling()?;
    let rho = config.mask_correlation;

    // Stations at distinct cells, uniformly placed within them.
    let mut rng = stream(seed, STREAM_STATIONS, 0, 0);
    let n_stations = config.n_stations.min(cells);
    let mut cells_at = rng.sample_indices(cells, n_stations);
    cells_at.sort_unstable();
    let sites: Vec<(usize, f64, f64)> = cells_at
        .iter()
        .map(|&i| {
            let (e, n) = g.cell_center(i / g.ncols, i % g.ncols);
            (
                i,
                e + (rng.uniform() - 0.5) * cs,
                n + (rng.uniform() - 0.5) * cs,
            )
        })
        .collect();

    let mut dates = Vec::with_capacity(config.n_days);
    let mut truth = Vec::with_capacity(config.n_days);
    let mut grids = Vec::new();
    let mut met = Vec::new();
    let mut station_rows: Vec<(usize, StationRecord, f64)> = Vec::new();
    let mut masks: BTreeMap<Product, Vec<bool>> = products
        .iter()
        .map(|(p, _)| (*p, Vec::with_capacity(cells * config.n_days)))
        .collect();

    for day in 0..config.n_days {
        let date = config.start + chrono::Days::new(day as u64);
        dates.push(date);

        let f = gaussian_field(
            g.nrows,
            g.ncols,
            config.correlation_length / cs,
            &mut stream(seed, STREAM_TRUTH, day, 0),
        );
        let t: Vec<f32> = f
            .iter()
            .map(|z| (config.aod_mean + config.aod_sd * z).max(0.0) as f32)
            .collect();

        // Validity draws, then the MODIS platform split and the QA fallback codes.
        let mut mrng = stream(seed, STREAM_MASK, day, 0);
        let mut valid = vec![vec![false; cells]; products.len()];
        let mut platform = vec![vec![(false, false); cells]; products.len()];
        let mut low_qa = vec![vec![0u8; cells]; products.len()];
        for i in 0..cells {
            let shared = mrng.uniform();
            for (k, (p, d)) in products.iter().enumerate() {
                let coupled = mrng.uniform() < c;
                let own = mrng.uniform();
                let u = match (coupled, mask::antithetic(k, rho)) {
                    (true, true) => 1.0 - shared,
                    (true, false) => shared,
                    (false, _) => own,
                };
                let split = mrng.uniform();
                low_qa[k][i] = mrng.below(3) as u8;
                if u < d.validity {
                    valid[k][i] = true;
                    platform[k][i] = if !p.is_modis() || split < config.modis_overlap {
                        (true, true)
                    } else if split < config.modis_overlap + (1.0 - config.modis_overlap) / 2.0 {
                        (true, false)
                    } else {
                        (false, true)
                    };
                }
            }
        }

        for (k, (p, d)) in products.iter().enumerate() {
            let z = gaussian_field(
                g.nrows,
                g.ncols,
                config.noise_correlation_length / cs,
                &mut stream(seed, STREAM_NOISE, day, p.index()),
            );
            let q = normal_quantile((1.0 + d.qa_fidelity) / 2.0);
            let value: Vec<f32> = (0..cells)
                .map(|i| (t[i] as f64 + d.bias + d.noise_sd * z[i]).max(0.0) as f32)
                .collect();
            let qa: Vec<u8> = (0..cells)
                .map(|i| if z[i].abs() < q { 3 } else { low_qa[k][i] })
                .collect();
            for (si, src) in p.sources().into_iter().enumerate() {
                // Aqua is listed first for MODIS products.
                let on = |i: usize| {
                    valid[k][i]
                        && if si == 0 {
                            platform[k][i].0
                        } else {
                            platform[k][i].1
                        }
                };
                let v: Vec<f32> = (0..cells)
                    .map(|i| if on(i) { value[i] } else { DEFAULT_NODATA })
                    .collect();
                let qa_src: Vec<u8> = (0..cells).map(|i| if on(i) { qa[i] } else { 0 }).collect();
                grids.push(AodGrid::new(g, DEFAULT_NODATA, v, qa_src, src, date)?);
            }
            masks
                .get_mut(p)
                .expect("configured")
                .extend_from_slice(&valid[k]);
        }

        let mfields: Vec<Vec<f64>> = (0..MetValues::COUNT)
            .map(|v| {
                gaussian_field(
                    g.nrows,
                    g.ncols,
                    config.met.correlation_length / cs,
                    &mut stream(seed, STREAM_MET, day, v),
                )
            })
            .collect();
        let s = config.met.spacing;
        for r in (s / 2..g.nrows).step_by(s) {
            for col in (s / 2..g.ncols).step_by(s) {
                let (east, north) = g.cell_center(r, col);
                met.push(MetRecord {
                    east,
                    north,
                    date,
                    values: met_at(&mfields, &config.met, r * g.ncols + col),
                });
            }
        }

        let mut trng = stream(seed, STREAM_TARGET, day, 0);
        for (si, &(cell, east, north)) in sites.iter().enumerate() {
            let m = met_at(&mfields, &config.met, cell);
            let aod = t[cell] as f64;
            let pm_true = target_pm25(&config.target, aod, &m, 0.0);
            let pm = target_pm25(
                &config.target,
                aod,
                &m,
                config.target.noise_sd * trng.normal(),
            );
            station_rows.push((
                si,
                StationRecord {
                    station_id: format!("S{:03}", si + 1),
                    east,
                    north,
                    date,
                    pm25_raw: invert_pm25_correction(pm, m.rh, config.target.rh_max),
                    pm25_corrected: None,
                },
                pm_true,
            ));
        }
        truth.push(t);
    }

    station_rows.sort_by_key(|a| (a.0, a.1.date));
    let (stations, pm25_true) = station_rows.into_iter().map(|(_, s, p)| (s, p)).unzip();
    // Sources in canonical order within each day.
    grids.sort_by_key(|g| (g.date(), g.source()));
    Ok(Scene {
        geometry: g,
        dates,
        truth,
        grids,
        met,
        stations,
        pm25_true,
        masks,
    })
}

/// A scene's sources, in canonical order.
pub fn scene_sources(config: &SceneConfig) -> Vec<Source> {
    let mut v: Vec<Source> = config.products.keys().flat_map(|p| p.sources()).collect();
    v.sort();
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::correct_pm25;

    fn small(seed: u64) -> SceneConfig {
        let mut c = SceneConfig::new(seed);
        c.geometry = geometry(30, 30, 0.0, 0.0, 1000.0);
        c.n_days = 4;
        c.n_stations = 10;
        c.met.spacing = 6;
        c
    }

    #[test]
    fn zero_degradation_reproduces_truth() {
        let mut c = small(1);
        for d in c.products.values_mut() {
            *d = Degradation::NONE;
        }
        c.modis_overlap = 1.0;
        let s = generate_scene(&c).unwrap();
        assert_eq!(s.grids.len(), 4 * 6);
        for g in &s.grids {
            let day = s.dates.iter().position(|d| *d == g.date()).unwrap();
            assert_eq!(g.values(), &s.truth[day][..]);
            assert!(g.qa().iter().all(|&q| q == 3));
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            generate_scene(&small(9)).unwrap(),
            generate_scene(&small(9)).unwrap()
        );
        assert_ne!(
            generate_scene(&small(9)).unwrap().truth,
            generate_scene(&small(10)).unwrap().truth
        );
    }

    #[test]
    fn station_readings_invert_correction() {
        let mut c = small(3);
        c.target.noise_sd = 0.0;
        let s = generate_scene(&c).unwrap();
        assert_eq!(s.stations.len(), 40);
        assert!(
            s.stations
                .windows(2)
                .all(|w| (w[0].station_id.as_str(), w[0].date)
                    < (w[1].station_id.as_str(), w[1].date))
        );
        // Recompute each target from the station's own cell.
        for (st, &pm) in s.stations.iter().zip(&s.pm25_true) {
            assert!(s.geometry.locate(st.east, st.north).is_some());
            assert!(pm > 0.0 && st.pm25_raw <= pm);
        }
        let rh = 37.5;
        let raw = invert_pm25_correction(50.0, rh, 99.0);
        assert!((correct_pm25(raw, rh, 99.0).unwrap() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn validity_rate_matches() {
        let mut c = SceneConfig::new(4);
        c.n_days = 30;
        c.products = [(
            Product::Vdb,
            Degradation {
                validity: 0.6,
                ..Degradation::NONE
            },
        )]
        .into_iter()
        .collect();
        let s = generate_scene(&c).unwrap();
        let cov = s.mask_coverage(c.product_set());
        assert!((cov - 60.0).abs() <= 2.0, "{cov}");
        let valid: usize = s.grids.iter().map(|g| g.valid_count()).sum();
        assert!((100.0 * valid as f64 / (30.0 * 10_000.0) - cov).abs() < 1e-9);
    }

    #[test]
    fn qa_fidelity_rate() {
        let mut c = small(5);
        c.geometry = geometry(60, 60, 0.0, 0.0, 1000.0);
        c.n_days = 20;
        c.products = [(
            Product::Vdt,
            Degradation {
                noise_sd: 0.05,
                validity: 1.0,
                qa_fidelity: 0.7,
                bias: 0.0,
            },
        )]
        .into_iter()
        .collect();
        let s = generate_scene(&c).unwrap();
        let n: usize = s.grids.iter().map(|g| g.qa().len()).sum();
        let good: usize = s
            .grids
            .iter()
            .map(|g| g.qa().iter().filter(|&&q| q == 3).count())
            .sum();
        let f = good as f64 / n as f64;
        assert!((f - 0.7).abs() < 0.05, "{f}");
    }

    #[test]
    fn analytic_union_matches_masks() {
        let mut c = SceneConfig::new(6);
        c.n_days = 20;
        c.products = [
            (
                Product::Mdb,
                Degradation {
                    validity: 0.77,
                    ..Degradation::NONE
                },
            ),
            (
                Product::Vdt,
                Degradation {
                    validity: 0.76,
                    ..Degradation::NONE
                },
            ),
        ]
        .into_iter()
        .collect();
        let s = generate_scene(&c).unwrap();
        let set = c.product_set();
        let want = c.analytic_union_coverage(set).unwrap();
        assert!(
            (s.mask_coverage(set) - want).abs() < 1.0,
            "{} vs {want}",
            s.mask_coverage(set)
        );
        // Empirical mask correlation near the configured value.
        let (a, b) = (&s.masks[&Product::Mdb], &s.masks[&Product::Vdt]);
        let n = a.len() as f64;
        let (pa, pb) = (
            a.iter().filter(|&&x| x).count() as f64 / n,
            b.iter().filter(|&&x| x).count() as f64 / n,
        );
        let pab = a.iter().zip(b).filter(|(x, y)| **x && **y).count() as f64 / n;
        let corr = (pab - pa * pb) / libm::sqrt(pa * (1.0 - pa) * pb * (1.0 - pb));
        assert!((corr - 0.2).abs() < 0.02, "{corr}");
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = small(1);
        c.products.get_mut(&Product::Mdb).unwrap().validity = 1.5;
        assert!(generate_scene(&c).is_err());
        let mut c = small(1);
        c.mask_correlation = 2.0;
        assert!(c.validate().is_err());
        let mut c = small(1);
        c.products.clear();
        assert!(c.validate().is_err());
    }
}
