//! The six pipeline commands. Each writes its outputs under one directory
//! and finishes with a manifest listing their hashes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use aeromix_core::dataset::{krige_met_grid, Dataset};
use aeromix_core::fusion::{
    run_data_level, run_scenario, run_scenario_with, DataLevelReport, RunConfig, ScenarioReport,
};
use aeromix_core::mapgen::{
    generate_quasi_stations, idw_interpolate, render_map, world_file, Palette, Pm25Map,
    QuasiStation,
};
use aeromix_core::ml::FitCache;
use aeromix_core::ml::{
    compute_metrics, fit_model, kfold_cv, train_test_split, Metrics, ModelKind, ModelParams,
    Regressor,
};
use aeromix_core::rng::mix_seed;
use aeromix_core::synth::{generate_scene, Scene};
use aeromix_core::{AodGrid, MetRecord, Product, StationRecord};
use log::info;

use crate::config::PipelineConfig;
use crate::error::{AppError, AppResult, ErrorClass};
use crate::exec::RayonExecutor;
use crate::manifest::{Manifest, MANIFEST_FILE};
use crate::{agf, bundle, fsio, report, tables};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Preprocess,
    FuseData,
    FuseDecision,
    Map,
    Synth,
    Eval,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Preprocess => "preprocess",
            Command::FuseData => "fuse-data",
            Command::FuseDecision => "fuse-decision",
            Command::Map => "map",
            Command::Synth => "synth",
            Command::Eval => "eval",
        }
    }
}

/// Output directory that remembers what was written.
pub struct OutDir {
    root: PathBuf,
    files: BTreeMap<String, String>,
}

impl OutDir {
    pub fn new(root: &Path) -> AppResult<Self> {
        std::fs::create_dir_all(root)
            .map_err(|e| AppError::new(ErrorClass::Io, format!("{}: {e}", root.display())))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> AppResult<()> {
        fsio::write(&self.root.join(rel), bytes)?;
        self.files.insert(rel.to_string(), fsio::sha256_hex(bytes));
        Ok(())
    }

    fn finish(
        self,
        command: Command,
        cfg: &PipelineConfig,
        seeds: Vec<(String, u64)>,
    ) -> AppResult<()> {
        let manifest = Manifest {
            command: command.name().into(),
            effective_config: cfg.effective_text(),
            seeds,
            outputs: self.files.into_iter().collect(),
        };
        fsio::write(
            &self.root.join(MANIFEST_FILE),
            manifest.to_text().as_bytes(),
        )
    }
}

/// What a command produced, for callers that inspect results in memory.
#[derive(Debug, Clone)]
pub enum Outcome {
    Preprocess(Box<Dataset>),
    FuseData(Box<DataLevelReport>),
    FuseDecision(Vec<ScenarioReport>),
    Map {
        map: Pm25Map,
        quasi: Vec<QuasiStation>,
    },
    Synth(Box<Scene>),
    Eval(Vec<EvalRow>),
}

/// One model kind's held-out performance in the `eval` command.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub kind: ModelKind,
    pub metrics: Metrics,
    pub best: ModelParams,
    pub cv_rmse: f64,
}

pub struct Inputs {
    pub stations: Vec<StationRecord>,
    pub met: Vec<MetRecord>,
    pub grids: Vec<AodGrid>,
}

pub fn load_inputs(cfg: &PipelineConfig) -> AppResult<Inputs> {
    let stations = tables::load_stations(&cfg.stations)?;
    let met = tables::load_met(&cfg.met)?;
    let grids = agf::load_grid_dir(&cfg.grids)?;
    if grids.is_empty() {
        return Err(AppError::new(
            ErrorClass::InputMissing,
            format!("{}: no .agf grids", cfg.grids.display()),
        ));
    }
    info!(
        "loaded {} station-days, {} met records, {} grids",
        stations.len(),
        met.len(),
        grids.len()
    );
    Ok(Inputs {
        stations,
        met,
        grids,
    })
}

pub fn build_dataset(
    cfg: &PipelineConfig,
    inputs: &Inputs,
    exec: &RayonExecutor,
) -> AppResult<Dataset> {
    let ds = Dataset::build(
        &inputs.grids,
        &inputs.stations,
        &inputs.met,
        &cfg.dataset,
        exec,
    )
    .map_err(|e| AppError::core("building dataset", e))?;
    info!(
        "dataset: {} dates, {} station-days",
        ds.dates.len(),
        ds.stations.len()
    );
    Ok(ds)
}

pub fn run_config(cfg: &PipelineConfig, kind: ModelKind) -> RunConfig {
    RunConfig {
        split_ratio: cfg.split_ratio,
        folds: cfg.cv_folds,
        grid: cfg.grid(kind),
        stacking: cfg.stacking,
        seed: cfg.seed_or_default(),
    }
}

/// Runs one command, writing outputs and `manifest.txt` under `out`.
pub fn run(
    command: Command,
    cfg: &PipelineConfig,
    out: &Path,
    threads: usize,
) -> AppResult<Outcome> {
    let exec =
        RayonExecutor::new(threads).map_err(|e| AppError::config(format!("thread pool: {e}")))?;
    let mut dir = OutDir::new(out)?;
    let seed = cfg.seed_or_default();
    let mut seeds = vec![("run".to_string(), seed)];
    let outcome = match command {
        Command::Synth => {
            let scene_seed = cfg.seed.ok_or_else(|| {
                AppError::config("synth requires an explicit seed (config `seed` or --seed)")
            })?;
            seeds = vec![("scene".to_string(), scene_seed)];
            Outcome::Synth(Box::new(synth(cfg, scene_seed, &mut dir)?))
        }
        _ => {
            let inputs = load_inputs(cfg)?;
            let ds = build_dataset(cfg, &inputs, &exec)?;
            match command {
                Command::Preprocess => {
                    preprocess(&ds, &mut dir)?;
                    Outcome::Preprocess(Box::new(ds))
                }
                Command::FuseData => {
                    Outcome::FuseData(Box::new(fuse_data(cfg, &ds, &exec, &mut dir)?))
                }
                Command::FuseDecision => {
                    Outcome::FuseDecision(fuse_decision(cfg, &ds, &exec, &mut dir)?)
                }
                Command::Map => {
                    let (map, quasi) = map(cfg, &ds, &inputs.met, &exec, &mut dir)?;
                    Outcome::Map { map, quasi }
                }
                Command::Eval => Outcome::Eval(eval(cfg, &ds, &exec, &mut dir)?),
                Command::Synth => unreachable!("handled above"),
            }
        }
    };
    dir.finish(command, cfg, seeds)?;
    Ok(outcome)
}

fn write_matrix(
    dir: &mut OutDir,
    stem: &str,
    m: &aeromix_core::ml::TrainingMatrix,
) -> AppResult<()> {
    dir.write(&format!("{stem}.csv"), tables::matrix_to_csv(m).as_bytes())?;
    dir.write(
        &format!("{stem}_keys.csv"),
        tables::matrix_keys_to_csv(m).as_bytes(),
    )
}

fn preprocess(ds: &Dataset, dir: &mut OutDir) -> AppResult<()> {
    let mut summary = String::new();
    writeln!(summary, "Preprocessing summary").unwrap();
    writeln!(
        summary,
        "dates {}  station-days {}  cells {}",
        ds.dates.len(),
        ds.stations.len(),
        ds.n_cells()
    )
    .unwrap();
    writeln!(summary).unwrap();
    writeln!(
        summary,
        "{:<16} {:>10} {:>10} {:>12}",
        "source", "retrieved", "rejected", "zero-weight"
    )
    .unwrap();
    for (s, w) in &ds.window_stats {
        writeln!(
            summary,
            "{:<16} {:>10} {:>10} {:>12}",
            s.to_string(),
            w.retrieved,
            w.rejected,
            w.zero_weight
        )
        .unwrap();
    }
    writeln!(summary).unwrap();
    for cf in &ds.crossfill {
        let fmt = |r: &Option<aeromix_core::preprocess::CrossFillRegression>| match r {
            Some(r) => format!(
                "slope {:.4} intercept {:.4} r {:.3}",
                r.slope, r.intercept, r.r
            ),
            None => "not fitted".into(),
        };
        writeln!(
            summary,
            "gap fill {} ({} pairs): aqua->terra {}; terra->aqua {}",
            cf.algorithm,
            cf.n_pairs,
            fmt(&cf.aqua_to_terra),
            fmt(&cf.terra_to_aqua)
        )
        .unwrap();
    }
    writeln!(summary).unwrap();
    writeln!(
        summary,
        "{:<6} {:>10} {:>8} {:>8}",
        "input", "coverage%", "rows", "dropped"
    )
    .unwrap();
    let targets: Vec<Option<Product>> = ds.products.iter().map(Some).chain([None]).collect();
    for t in targets {
        let rows = ds
            .training_rows(t)
            .map_err(|e| AppError::core("training matrix", e))?;
        let name = t.map_or("fused".to_string(), |p| p.code().to_string());
        let cov = ds.coverage(t).map_err(|e| AppError::core("coverage", e))?;
        writeln!(
            summary,
            "{:<6} {:>10.2} {:>8} {:>8}",
            name,
            cov,
            rows.matrix.n_rows(),
            rows.dropped
        )
        .unwrap();
        write_matrix(
            dir,
            &format!("matrix_{}", name.to_ascii_lowercase()),
            &rows.matrix,
        )?;
    }
    dir.write("preprocess.txt", summary.as_bytes())
}

fn fuse_data(
    cfg: &PipelineConfig,
    ds: &Dataset,
    exec: &RayonExecutor,
    dir: &mut OutDir,
) -> AppResult<DataLevelReport> {
    let r = run_data_level(ds, &run_config(cfg, cfg.model), exec)
        .map_err(|e| AppError::core("data-level fusion", e))?;
    write_matrix(dir, "matrix_fused", &r.matrix)?;
    dir.write(
        "model_data_level.bundle",
        bundle::model_to_string(&r.model).as_bytes(),
    )?;
    dir.write("data_level.csv", report::data_level_to_csv(&r).as_bytes())?;
    dir.write("data_level.txt", report::data_level_to_text(&r).as_bytes())?;
    Ok(r)
}

fn fuse_decision(
    cfg: &PipelineConfig,
    ds: &Dataset,
    exec: &RayonExecutor,
    dir: &mut OutDir,
) -> AppResult<Vec<ScenarioReport>> {
    let rc = run_config(cfg, cfg.model);
    let mut reports = Vec::with_capacity(cfg.scenarios.len());
    let mut cache = FitCache::new();
    for s in &cfg.scenarios {
        info!("scenario {} [{}]", s.id, s.products);
        let r = run_scenario_with(s, ds, &rc, exec, &mut cache)
            .map_err(|e| AppError::core(format!("scenario {}", s.id), e))?;
        dir.write(
            &format!("fusion_s{:02}.bundle", s.id),
            bundle::fusion_to_string(&r.model).as_bytes(),
        )?;
        reports.push(r);
    }
    info!("{} fits and searches reused across scenarios", cache.hits());
    dir.write(
        "scenarios.csv",
        report::scenarios_to_csv(&reports).as_bytes(),
    )?;
    dir.write(
        "scenarios.txt",
        report::scenarios_to_text(&reports).as_bytes(),
    )?;
    Ok(reports)
}

fn map(
    cfg: &PipelineConfig,
    ds: &Dataset,
    met: &[MetRecord],
    exec: &RayonExecutor,
    dir: &mut OutDir,
) -> AppResult<(Pm25Map, Vec<QuasiStation>)> {
    let settings = &cfg.map;
    let date = match settings.date {
        Some(d) if ds.dates.contains(&d) => d,
        Some(d) => return Err(AppError::config(format!("map.date {d} has no AOD grids"))),
        None => ds.dates[0],
    };
    let scenario = settings.scenario;
    let r = run_scenario(&scenario, ds, &run_config(cfg, cfg.model), exec)
        .map_err(|e| AppError::core(format!("scenario {}", scenario.id), e))?;
    let met_grid = krige_met_grid(met, date, &ds.geometry, &cfg.dataset.variogram_kinds)
        .map_err(|e| AppError::core(format!("kriging met on {date}"), e))?;
    let mut aod: BTreeMap<Product, &[f32]> = BTreeMap::new();
    for p in scenario.products.iter() {
        let layer = ds.pixel_day(p, date).ok_or_else(|| {
            AppError::new(ErrorClass::Validation, format!("{p} missing on {date}"))
        })?;
        aod.insert(p, layer);
    }
    let source = format!("scenario-{}", scenario.id);
    let quasi = generate_quasi_stations(
        &r.model,
        &ds.geometry,
        &aod,
        &met_grid,
        date,
        cfg.dataset.preprocess.blh_min,
        settings.stride,
        &source,
    )
    .map_err(|e| AppError::core("quasi-stations", e))?;
    let ground: Vec<(f64, f64, f64)> = ds
        .stations
        .iter()
        .filter(|s| s.date == date)
        .filter_map(|s| s.pm25_corrected.map(|v| (s.east, s.north, v)))
        .collect();
    let mut points = ground.clone();
    points.extend(quasi.iter().map(|q| (q.east, q.north, q.pm25)));
    let values = idw_interpolate(&points, &ds.geometry, cfg.idw_power, exec)
        .map_err(|e| AppError::core("IDW", e))?;
    let map = Pm25Map {
        geometry: ds.geometry,
        date,
        values,
        n_ground: ground.len(),
        n_quasi: quasi.len(),
    };

    let lo = map.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = map.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = settings.min.unwrap_or(lo);
    let mut max = settings.max.unwrap_or(hi);
    if !(max > min) {
        max = min + 1.0;
    }
    let palette = Palette {
        kind: settings.palette,
        min,
        max,
    };
    let rendered = render_map(&map, &palette).map_err(|e| AppError::core("rendering", e))?;

    let stem = format!("map_{date}");
    dir.write(&format!("{stem}.agf"), agf::map_to_string(&map).as_bytes())?;
    dir.write(&format!("{stem}.{}", palette.extension()), &rendered.image)?;
    dir.write(&format!("{stem}.wld"), world_file(&map.geometry).as_bytes())?;
    let mut log = rendered.log.to_text(&palette);
    writeln!(
        log,
        "ground stations {}  quasi-stations {}",
        map.n_ground, map.n_quasi
    )
    .unwrap();
    writeln!(
        log,
        "note: ground stations and quasi-stations enter IDW with equal weight"
    )
    .unwrap();
    dir.write(&format!("{stem}_render.txt"), log.as_bytes())?;
    dir.write(
        &format!("quasi_stations_{date}.csv"),
        tables::quasi_to_csv(&quasi).as_bytes(),
    )?;
    dir.write(
        &format!("fusion_s{:02}.bundle", scenario.id),
        bundle::fusion_to_string(&r.model).as_bytes(),
    )?;
    Ok((map, quasi))
}

fn eval(
    cfg: &PipelineConfig,
    ds: &Dataset,
    exec: &RayonExecutor,
    dir: &mut OutDir,
) -> AppResult<Vec<EvalRow>> {
    let m = ds
        .training_rows(cfg.eval_target)
        .map_err(|e| AppError::core("training matrix", e))?
        .matrix;
    let seed = cfg.seed_or_default();
    let (tr, te) = train_test_split(m.n_rows(), cfg.split_ratio, mix_seed(seed, 700))
        .map_err(|e| AppError::core("split", e))?;
    let (train, test) = (m.subset(&tr), m.subset(&te));
    let target = cfg
        .eval_target
        .map_or("fused".to_string(), |p| p.code().to_string());
    let mut rows = Vec::new();
    let mut csv = String::from("model,target,r2,rmse,mae,n_test,best_params,cv_rmse\n");
    let mut text = format!(
        "Model comparison on {target} ({} train, {} test)\nnote: {}\n",
        train.n_rows(),
        test.n_rows(),
        report::GRID_NOTE
    );
    writeln!(
        text,
        "  {:<7} {:>7} {:>9} {:>9}",
        "model", "R2", "RMSE", "MAE"
    )
    .unwrap();
    for (i, kind) in [ModelKind::Gbt, ModelKind::Rf, ModelKind::Linear]
        .into_iter()
        .enumerate()
    {
        let ctx = |e| AppError::core(format!("{} model", kind.name()), e);
        let cv = kfold_cv(
            &train,
            &cfg.grid(kind),
            cfg.cv_folds,
            mix_seed(seed, 701 + i as u64),
            exec,
        )
        .map_err(ctx)?;
        let model = fit_model(&train, cv.best(), mix_seed(seed, 711 + i as u64)).map_err(ctx)?;
        let pred = model.predict_matrix(&test).map_err(ctx)?;
        let metrics = compute_metrics(test.targets(), &pred).map_err(ctx)?;
        let best_label = tables::params_label(cv.best());
        let cv_rmse = cv.rows[cv.best_index].mean_rmse;
        let r2 = if metrics.r2_defined() {
            metrics.r2.to_string()
        } else {
            "nan".into()
        };
        writeln!(
            csv,
            "{},{target},{r2},{},{},{},{best_label},{cv_rmse}",
            kind.name(),
            metrics.rmse,
            metrics.mae,
            metrics.n
        )
        .unwrap();
        writeln!(
            text,
            "  {:<7} {:>7.3} {:>9.3} {:>9.3}   {best_label}",
            kind.name(),
            metrics.r2,
            metrics.rmse,
            metrics.mae
        )
        .unwrap();
        dir.write(
            &format!("cv_{}.csv", kind.name()),
            tables::cv_to_csv(&target, &cv).as_bytes(),
        )?;
        dir.write(
            &format!("model_{}.bundle", kind.name()),
            bundle::model_to_string(&model).as_bytes(),
        )?;
        rows.push(EvalRow {
            kind,
            metrics,
            best: *cv.best(),
            cv_rmse,
        });
    }
    dir.write("eval.csv", csv.as_bytes())?;
    dir.write("eval.txt", text.as_bytes())?;
    Ok(rows)
}

fn synth(cfg: &PipelineConfig, seed: u64, dir: &mut OutDir) -> AppResult<Scene> {
    let mut sc = cfg.synth.clone();
    sc.seed = seed;
    let scene = generate_scene(&sc).map_err(|e| AppError::core("synthetic scene", e))?;
    for g in &scene.grids {
        dir.write(
            &format!("grids/{}", agf::grid_file_name(g)),
            agf::grid_to_string(g).as_bytes(),
        )?;
    }
    dir.write(
        "stations.csv",
        tables::stations_to_csv(&scene.stations).as_bytes(),
    )?;
    dir.write("met.csv", tables::met_to_csv(&scene.met).as_bytes())?;
    let mut truth = String::from("station_id,date,pm25_true\n");
    for (s, v) in scene.stations.iter().zip(&scene.pm25_true) {
        writeln!(truth, "{},{},{v}", s.station_id, s.date).unwrap();
    }
    dir.write("truth_pm25.csv", truth.as_bytes())?;
    let mut summary = String::from("Synthetic scene\n");
    writeln!(
        summary,
        "grid {}x{}  days {}  stations {}  seed {seed}",
        sc.geometry.nrows, sc.geometry.ncols, sc.n_days, sc.n_stations
    )
    .unwrap();
    for p in sc.products.keys() {
        let set = [*p].into_iter().collect();
        writeln!(
            summary,
            "{p} mask coverage {:.3}%",
            scene.mask_coverage(set)
        )
        .unwrap();
    }
    let all = sc.product_set();
    let analytic = sc
        .analytic_union_coverage(all)
        .map_err(|e| AppError::core("union coverage", e))?;
    writeln!(
        summary,
        "union mask coverage {:.3}% (expected {:.3}%)",
        scene.mask_coverage(all),
        analytic
    )
    .unwrap();
    dir.write("scene.txt", summary.as_bytes())?;
    Ok(scene)
}
