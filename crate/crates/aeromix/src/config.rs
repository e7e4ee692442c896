//! Pipeline configuration: a `key=value` text file with `#` comments.
//!
//! Every key has a default; unknown keys are rejected. The resolved set of
//! keys, rendered in sorted order, is the effective configuration whose hash
//! goes into the run manifest. Relative paths resolve against the directory
//! of the config file (or the working directory without one).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use aeromix_core::dataset::DatasetConfig;
use aeromix_core::fusion::{parse_scenario_ids, FusionScenario, Stacking};
use aeromix_core::grid::{GeoTransform, GridGeometry};
use aeromix_core::mapgen::PaletteKind;
use aeromix_core::ml::{GbtGrid, ModelKind, ModelParams, RfParams};
use aeromix_core::preprocess::{PreprocessParams, VariogramKind};
use aeromix_core::synth::{Degradation, SceneConfig};
use aeromix_core::{Date, Product, ProductSet};

use crate::bundle::parse_max_features;
use crate::error::{AppError, AppResult};
use crate::fsio;

const PRODUCT_KEYS: [&str; 4] = ["bias", "noise_sd", "validity", "qa_fidelity"];

/// Keys with their defaults. Per-product synth keys are added in
/// [`defaults`].
const BASE_DEFAULTS: &[(&str, &str)] = &[
    ("data_dir", "."),
    ("stations", "stations.csv"),
    ("met", "met.csv"),
    ("grids", "grids"),
    ("products", "MDB,MDT,VDB,VDT"),
    ("std_threshold", "0.02"),
    ("rh_max", "99"),
    ("blh_min", "50"),
    ("min_pairs", "30"),
    ("variograms", "spherical,exponential,gaussian"),
    ("split_ratio", "0.75"),
    ("cv_folds", "5"),
    ("model", "gbt"),
    ("grid.n_trees", "100,300"),
    ("grid.max_depth", "3,5,7"),
    ("grid.learning_rate", "0.05,0.1"),
    ("grid.subsample", "0.8,1.0"),
    ("grid.min_samples_leaf", "3"),
    ("rf.n_trees", "100"),
    ("rf.max_depth", "12"),
    ("rf.min_samples_leaf", "2"),
    ("rf.bootstrap", "true"),
    ("rf.max_features", "sqrt"),
    ("stacking", "out-of-fold"),
    ("stacking_folds", "5"),
    ("scenarios", "1,2,3,4,5,6,7,8,9,10,11"),
    ("eval.target", "fused"),
    ("idw_power", "2"),
    ("map.scenario", "1"),
    ("map.date", "first"),
    ("map.stride", "1"),
    ("map.palette", "heat"),
    ("map.min", "auto"),
    ("map.max", "auto"),
    ("seed", "none"),
    ("synth.nrows", "100"),
    ("synth.ncols", "100"),
    ("synth.cellsize", "1000"),
    ("synth.origin_east", "500000"),
    ("synth.origin_north", "3900000"),
    ("synth.start", "2020-01-01"),
    ("synth.n_days", "60"),
    ("synth.n_stations", "21"),
    ("synth.correlation_length", "20000"),
    ("synth.aod_mean", "0.3"),
    ("synth.aod_sd", "0.1"),
    ("synth.noise_correlation_length", "10000"),
    ("synth.mask_correlation", "0.2"),
    ("synth.modis_overlap", "0.5"),
    ("synth.met_spacing", "10"),
    ("synth.products", "MDB,MDT,VDB,VDT"),
];

fn defaults() -> BTreeMap<String, String> {
    let mut m: BTreeMap<String, String> = BASE_DEFAULTS
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let scene = SceneConfig::new(0);
    for (p, d) in &scene.products {
        let code = p.code().to_ascii_lowercase();
        for (k, v) in PRODUCT_KEYS
            .iter()
            .zip([d.bias, d.noise_sd, d.validity, d.qa_fidelity])
        {
            m.insert(format!("synth.{code}.{k}"), v.to_string());
        }
    }
    m
}

/// Settings for the `map` command.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSettings {
    pub scenario: FusionScenario,
    /// `None` selects the first date of the dataset.
    pub date: Option<Date>,
    pub stride: usize,
    pub palette: PaletteKind,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Resolved key/value pairs, defaults included.
    pub values: BTreeMap<String, String>,
    pub stations: PathBuf,
    pub met: PathBuf,
    pub grids: PathBuf,
    pub dataset: DatasetConfig,
    pub split_ratio: f64,
    pub cv_folds: usize,
    pub model: ModelKind,
    pub gbt_grid: GbtGrid,
    pub rf_grid: Vec<RfParams>,
    pub stacking: Stacking,
    pub scenarios: Vec<FusionScenario>,
    /// `None` evaluates the data-level fused AOD.
    pub eval_target: Option<Product>,
    pub idw_power: f64,
    pub map: MapSettings,
    pub seed: Option<u64>,
    pub synth: SceneConfig,
}

/// Parses `key=value` lines, reporting the line of any problem.
pub fn parse_pairs(path: &Path, text: &str) -> AppResult<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            AppError::parse(path, i + 1, format!("expected `key=value`, got `{line}`"))
        })?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn list<T>(key: &str, v: &str, f: impl Fn(&str) -> Option<T>) -> AppResult<Vec<T>> {
    let items: Vec<&str> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(AppError::config(format!("{key}: empty list")));
    }
    items
        .into_iter()
        .map(|s| f(s).ok_or_else(|| AppError::config(format!("{key}: bad entry `{s}`"))))
        .collect()
}

fn products(key: &str, v: &str) -> AppResult<ProductSet> {
    Ok(list(key, v, |s| s.parse::<Product>().ok())?
        .into_iter()
        .collect())
}

struct Reader<'a>(&'a BTreeMap<String, String>);

impl Reader<'_> {
    fn raw(&self, key: &str) -> &str {
        self.0
            .get(key)
            .map(String::as_str)
            .expect("every key has a default")
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> AppResult<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.raw(key);
        v.parse()
            .map_err(|e| AppError::config(format!("{key} = `{v}`: {e}")))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> AppResult<Vec<T>> {
        list(key, self.raw(key), |s| s.parse().ok())
    }

    fn optional_f64(&self, key: &str) -> AppResult<Option<f64>> {
        match self.raw(key) {
            "auto" => Ok(None),
            _ => self.get(key).map(Some),
        }
    }
}

impl PipelineConfig {
    /// Loads a config file (or only defaults with `None`) and applies
    /// command-line overrides, which take precedence.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> AppResult<Self> {
        let mut pairs = Vec::new();
        let base_dir = match path {
            Some(p) => {
                let text = fsio::read_text(p)?;
                let mut seen = BTreeMap::new();
                for (line, k, v) in parse_pairs(p, &text)? {
                    if let Some(prev) = seen.insert(k.clone(), line) {
                        return Err(AppError::parse(
                            p,
                            line,
                            format!("`{k}` already set on line {prev}"),
                        ));
                    }
                    pairs.push((Some((p.to_path_buf(), line)), k, v));
                }
                p.parent().map(Path::to_path_buf).unwrap_or_default()
            }
            None => PathBuf::new(),
        };
        for (k, v) in overrides {
            pairs.push((None, k.clone(), v.clone()));
        }
        let mut values = defaults();
        for (origin, k, v) in pairs {
            if !values.contains_key(&k) {
                let msg = format!("unknown key `{k}`");
                return Err(match origin {
                    Some((p, line)) => AppError::new(
                        crate::error::ErrorClass::Config,
                        format!("{}:{line}: {msg}", p.display()),
                    ),
                    None => AppError::config(msg),
                });
            }
            values.insert(k, v);
        }
        Self::from_values(values, &base_dir)
    }

    fn from_values(values: BTreeMap<String, String>, base_dir: &Path) -> AppResult<Self> {
        let r = Reader(&values);
        let data_dir = base_dir.join(r.raw("data_dir"));
        let preprocess = PreprocessParams {
            std_threshold: r.get("std_threshold")?,
            rh_max: r.get("rh_max")?,
            blh_min: r.get("blh_min")?,
            min_pairs: r.get("min_pairs")?,
        };
        if !(preprocess.std_threshold >= 0.0) {
            return Err(AppError::config("std_threshold must be >= 0"));
        }
        if !(preprocess.rh_max > 0.0 && preprocess.rh_max < 100.0) {
            return Err(AppError::config("rh_max must lie in (0, 100)"));
        }
        if !(preprocess.blh_min > 0.0) {
            return Err(AppError::config("blh_min must be > 0"));
        }
        let variogram_kinds = list("variograms", r.raw("variograms"), |s| {
            VariogramKind::ALL.into_iter().find(|k| k.name() == s)
        })?;
        let dataset = DatasetConfig {
            preprocess,
            products: products("products", r.raw("products"))?,
            variogram_kinds,
        };
        let split_ratio: f64 = r.get("split_ratio")?;
        if !(split_ratio > 0.0 && split_ratio < 1.0) {
            return Err(AppError::config("split_ratio must lie in (0, 1)"));
        }
        let cv_folds: usize = r.get("cv_folds")?;
        if cv_folds < 2 {
            return Err(AppError::config("cv_folds must be at least 2"));
        }
        let model = ModelKind::parse(r.raw("model")).ok_or_else(|| {
            AppError::config(format!(
                "model = `{}`: expected gbt, rf or linear",
                r.raw("model")
            ))
        })?;
        let gbt_grid = GbtGrid {
            n_trees: r.list("grid.n_trees")?,
            max_depth: r.list("grid.max_depth")?,
            learning_rate: r.list("grid.learning_rate")?,
            subsample: r.list("grid.subsample")?,
            min_samples_leaf: r.list("grid.min_samples_leaf")?,
        };
        for p in gbt_grid.expand() {
            p.validate()
                .map_err(|e| AppError::config(format!("grid: {e}")))?;
        }
        let mut rf_grid = Vec::new();
        for n_trees in r.list::<usize>("rf.n_trees")? {
            for max_depth in r.list::<usize>("rf.max_depth")? {
                for min_samples_leaf in r.list::<usize>("rf.min_samples_leaf")? {
                    for bootstrap in r.list::<bool>("rf.bootstrap")? {
                        for max_features in list(
                            "rf.max_features",
                            r.raw("rf.max_features"),
                            parse_max_features,
                        )? {
                            let p = RfParams {
                                n_trees,
                                max_depth,
                                min_samples_leaf,
                                bootstrap,
                                max_features,
                            };
                            p.validate()
                                .map_err(|e| AppError::config(format!("rf: {e}")))?;
                            rf_grid.push(p);
                        }
                    }
                }
            }
        }
        let stacking = match r.raw("stacking") {
            "out-of-fold" => {
                let k: usize = r.get("stacking_folds")?;
                if k < 2 {
                    return Err(AppError::config("stacking_folds must be at least 2"));
                }
                Stacking::OutOfFold(k)
            }
            "in-sample" => Stacking::InSample,
            other => {
                return Err(AppError::config(format!(
                    "stacking = `{other}`: expected out-of-fold or in-sample"
                )))
            }
        };
        let scenarios =
            parse_scenario_ids(r.raw("scenarios")).map_err(|e| AppError::core("scenarios", e))?;
        let eval_target = match r.raw("eval.target") {
            "fused" => None,
            s => Some(
                s.parse::<Product>()
                    .map_err(|e| AppError::core("eval.target", e))?,
            ),
        };
        let idw_power: f64 = r.get("idw_power")?;
        if !(idw_power > 0.0 && idw_power.is_finite()) {
            return Err(AppError::config("idw_power must be positive"));
        }
        let map_id: u8 = r.get("map.scenario")?;
        let map = MapSettings {
            scenario: FusionScenario::canonical(map_id).ok_or_else(|| {
                AppError::config(format!("map.scenario = {map_id}: expected 1-11"))
            })?,
            date: match r.raw("map.date") {
                "first" => None,
                _ => Some(r.get("map.date")?),
            },
            stride: r.get("map.stride")?,
            palette: match r.raw("map.palette") {
                "gray" => PaletteKind::Gray,
                "heat" => PaletteKind::Heat,
                other => {
                    return Err(AppError::config(format!(
                        "map.palette = `{other}`: expected gray or heat"
                    )))
                }
            },
            min: r.optional_f64("map.min")?,
            max: r.optional_f64("map.max")?,
        };
        if map.stride == 0 {
            return Err(AppError::config("map.stride must be at least 1"));
        }
        let seed = match r.raw("seed") {
            "none" => None,
            _ => Some(r.get("seed")?),
        };
        let synth = Self::scene(&r, seed.unwrap_or(0))?;
        Ok(PipelineConfig {
            stations: data_dir.join(r.raw("stations")),
            met: data_dir.join(r.raw("met")),
            grids: data_dir.join(r.raw("grids")),
            values,
            dataset,
            split_ratio,
            cv_folds,
            model,
            gbt_grid,
            rf_grid,
            stacking,
            scenarios,
            eval_target,
            idw_power,
            map,
            seed,
            synth,
        })
    }

    fn scene(r: &Reader, seed: u64) -> AppResult<SceneConfig> {
        let mut s = SceneConfig::new(seed);
        let transform = GeoTransform {
            origin_east: r.get("synth.origin_east")?,
            origin_north: r.get("synth.origin_north")?,
            cellsize: r.get("synth.cellsize")?,
        };
        s.geometry = GridGeometry::new(r.get("synth.nrows")?, r.get("synth.ncols")?, transform)
            .map_err(|e| AppError::core("synth geometry", e))?;
        s.start = r.get("synth.start")?;
        s.n_days = r.get("synth.n_days")?;
        s.n_stations = r.get("synth.n_stations")?;
        s.correlation_length = r.get("synth.correlation_length")?;
        s.aod_mean = r.get("synth.aod_mean")?;
        s.aod_sd = r.get("synth.aod_sd")?;
        s.noise_correlation_length = r.get("synth.noise_correlation_length")?;
        s.mask_correlation = r.get("synth.mask_correlation")?;
        s.modis_overlap = r.get("synth.modis_overlap")?;
        s.met.spacing = r.get("synth.met_spacing")?;
        s.products.clear();
        for p in products("synth.products", r.raw("synth.products"))?.iter() {
            let code = p.code().to_ascii_lowercase();
            let k = |name: &str| format!("synth.{code}.{name}");
            s.products.insert(
                p,
                Degradation {
                    bias: r.get(&k("bias"))?,
                    noise_sd: r.get(&k("noise_sd"))?,
                    validity: r.get(&k("validity"))?,
                    qa_fidelity: r.get(&k("qa_fidelity"))?,
                },
            );
        }
        Ok(s)
    }

    /// The hyperparameter grid for the configured model kind.
    pub fn grid(&self, kind: ModelKind) -> Vec<ModelParams> {
        match kind {
            ModelKind::Gbt => self
                .gbt_grid
                .expand()
                .into_iter()
                .map(ModelParams::Gbt)
                .collect(),
            ModelKind::Rf => self.rf_grid.iter().copied().map(ModelParams::Rf).collect(),
            ModelKind::Linear => vec![ModelParams::Linear],
        }
    }

    pub fn seed_or_default(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    /// Sorted `key=value` lines of every resolved setting.
    pub fn effective_text(&self) -> String {
        let mut values = self.values.clone();
        values.insert("seed".into(), self.seed_or_default().to_string());
        values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

pub const DEFAULT_SEED: u64 = 42;
