use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use super::coverage::{mask_coverage, union_mask};
use super::decision::{
    train_decision_fusion_cached, Combiner, DecisionFusionModel, DecisionVector, Stacking,
};
use super::scenario::FusionScenario;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::grid::Product;
use crate::ml::{
    compute_metrics, fit_model, kfold_cv, train_test_split, CvResult, FitCache, GbtGrid, Metrics,
    Model, ModelParams, Regressor, TrainingMatrix,
};
use crate::records::SampleKey;
use crate::rng::mix_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub split_ratio: f64,
    pub folds: usize,
    pub grid: Vec<ModelParams>,
    pub stacking: Stacking,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            split_ratio: 0.75,
            folds: 5,
            grid: GbtGrid::default()
                .expand()
                .into_iter()
                .map(ModelParams::Gbt)
                .collect(),
            stacking: Stacking::OutOfFold(5),
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductResult {
    pub product: Product,
    pub metrics: Metrics,
    /// Pixel-day coverage, percent.
    pub coverage: f64,
    pub best: ModelParams,
    pub cv_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub scenario: FusionScenario,
    pub products: Vec<ProductResult>,
    pub fused: Metrics,
    pub fused_coverage: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Test keys of the split, sorted.
    pub test_keys: Vec<SampleKey>,
    /// Keys actually scored by each product's evaluation, in product order.
    pub product_eval_keys: Vec<Vec<SampleKey>>,
    pub fused_eval_keys: Vec<SampleKey>,
    pub combiner: Combiner,
    pub model: DecisionFusionModel,
}

impl ScenarioReport {
    /// Whether every evaluation scored exactly the split's test keys.
    pub fn keys_paired(&self) -> bool {
        self.fused_eval_keys == self.test_keys
            && self.product_eval_keys.iter().all(|k| *k == self.test_keys)
    }
}

fn row_index(m: &TrainingMatrix) -> BTreeMap<&SampleKey, usize> {
    m.keys().iter().enumerate().map(|(i, k)| (k, i)).collect()
}

fn covalid_keys(mats: &[&TrainingMatrix]) -> Vec<SampleKey> {
    let sets: Vec<BTreeSet<&SampleKey>> = mats.iter().map(|m| m.keys().iter().collect()).collect();
    sets[0]
        .iter()
        .filter(|k| sets[1..].iter().all(|s| s.contains(*k)))
        .map(|k| (*k).clone())
        .collect()
}

fn rows_for(m: &TrainingMatrix, keys: &[SampleKey]) -> Vec<usize> {
    let idx = row_index(m);
    keys.iter().map(|k| idx[k]).collect()
}

fn split_keys(
    keys: &[SampleKey],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<SampleKey>, Vec<SampleKey>)> {
    let (tr, te) = train_test_split(keys.len(), ratio, seed)?;
    Ok((
        tr.iter().map(|&i| keys[i].clone()).collect(),
        te.iter().map(|&i| keys[i].clone()).collect(),
    ))
}

fn tune<E: Executor>(m: &TrainingMatrix, cfg: &RunConfig, seed: u64, exec: &E) -> Result<CvResult> {
    kfold_cv(m, &cfg.grid, cfg.folds, seed, exec)
}

/// Split, tune, train and evaluate one scenario.
pub fn run_scenario<E: Executor>(
    scenario: &FusionScenario,
    dataset: &Dataset,
    cfg: &RunConfig,
    exec: &E,
) -> Result<ScenarioReport> {
    run_scenario_with(scenario, dataset, cfg, exec, &mut FitCache::new())
}

/// Runs scenarios in order. Seeds do not depend on the scenario, so scenarios
/// with the same co-valid keys share their split, and the tuning and base fits
/// they have in common are computed once.
pub fn run_scenarios<E: Executor>(
    scenarios: &[FusionScenario],
    dataset: &Dataset,
    cfg: &RunConfig,
    exec: &E,
) -> Result<Vec<ScenarioReport>> {
    let mut cache = FitCache::new();
    scenarios
        .iter()
        .map(|s| run_scenario_with(s, dataset, cfg, exec, &mut cache))
        .collect()
}

/// [`run_scenario`] sharing tuning and base fits through `cache`.
pub fn run_scenario_with<E: Executor>(
    scenario: &FusionScenario,
    dataset: &Dataset,
    cfg: &RunConfig,
    exec: &E,
    cache: &mut FitCache,
) -> Result<ScenarioReport> {
    let products: Vec<Product> = scenario.products.iter().collect();
    for p in &products {
        if !dataset.products.contains(*p) {
            return Err(Error::Config(format!(
                "scenario {} needs product {p}, not in the dataset",
                scenario.id
            )));
        }
    }
    let mut mats: BTreeMap<Product, TrainingMatrix> = BTreeMap::new();
    for &p in &products {
        mats.insert(p, dataset.training_rows(Some(p))?.matrix);
    }
    let mat_refs: Vec<&TrainingMatrix> = products.iter().map(|p| &mats[p]).collect();
    let covalid = covalid_keys(&mat_refs);
    let (train_keys, test_keys) = split_keys(&covalid, cfg.split_ratio, mix_seed(cfg.seed, 100))?;
    let test_set: BTreeSet<&SampleKey> = test_keys.iter().collect();

    // Everything but the test keys is available for training.
    let train_mats: BTreeMap<Product, TrainingMatrix> = mats
        .iter()
        .map(|(p, m)| {
            let rows: Vec<usize> = (0..m.n_rows())
                .filter(|&i| !test_set.contains(&m.keys()[i]))
                .collect();
            (*p, m.subset(&rows))
        })
        .collect();

    let mut best = BTreeMap::new();
    let mut cv = BTreeMap::new();
    for &p in &products {
        let m = &mats[&p];
        let r = cache.kfold_cv(
            &m.subset(&rows_for(m, &train_keys)),
            &cfg.grid,
            cfg.folds,
            mix_seed(cfg.seed, 200),
            exec,
        )?;
        best.insert(p, *r.best());
        cv.insert(p, r.rows[r.best_index].mean_rmse);
    }
    let model = train_decision_fusion_cached(
        scenario,
        &train_mats,
        &best,
        cfg.stacking,
        mix_seed(cfg.seed, 300),
        exec,
        cache,
    )?;

    let targets: Vec<f64> = {
        let m = &mats[&products[0]];
        rows_for(m, &test_keys)
            .iter()
            .map(|&i| m.targets()[i])
            .collect()
    };
    let mut decisions: Vec<DecisionVector> =
        alloc::vec![DecisionVector::default(); test_keys.len()];
    let mut results = Vec::new();
    let mut product_eval_keys = Vec::new();
    for &p in &products {
        let m = &mats[&p];
        let rows = rows_for(m, &test_keys);
        let pred: Vec<f64> = rows
            .iter()
            .map(|&i| model.decide(p, m.row(i)))
            .collect::<Result<_>>()?;
        for (d, v) in decisions.iter_mut().zip(&pred) {
            d.0.insert(p, *v);
        }
        product_eval_keys.push(rows.iter().map(|&i| m.keys()[i].clone()).collect());
        results.push(ProductResult {
            product: p,
            metrics: compute_metrics(&targets, &pred)?,
            coverage: dataset.coverage(Some(p))?,
            best: best[&p],
            cv_rmse: cv[&p],
        });
    }
    let fused_pred: Vec<f64> = decisions
        .iter()
        .map(|d| model.apply(d))
        .collect::<Result<_>>()?;
    let masks: Vec<Vec<bool>> = products
        .iter()
        .map(|p| dataset.availability(Some(*p)))
        .collect::<Result<_>>()?;
    let mask_refs: Vec<&[bool]> = masks.iter().map(|m| m.as_slice()).collect();
    Ok(ScenarioReport {
        scenario: *scenario,
        products: results,
        fused: compute_metrics(&targets, &fused_pred)?,
        fused_coverage: mask_coverage(&union_mask(&mask_refs)?)?,
        n_train: train_keys.len(),
        n_test: test_keys.len(),
        fused_eval_keys: test_keys.clone(),
        test_keys,
        product_eval_keys,
        combiner: model.combiner().clone(),
        model,
    })
}

/// One product against the data-level fused AOD on their shared keys.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedComparison {
    pub product: Product,
    pub n_train: usize,
    pub n_test: usize,
    pub product_metrics: Metrics,
    pub fused_metrics: Metrics,
    pub product_coverage: f64,
    pub product_best: ModelParams,
    pub fused_best: ModelParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataLevelReport {
    pub metrics: Metrics,
    pub coverage: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub best: ModelParams,
    pub cv_rmse: f64,
    pub model: Model,
    /// The fused training matrix (all station-days with a fused AOD).
    pub matrix: TrainingMatrix,
    pub comparisons: Vec<PairedComparison>,
}

fn fit_and_score<E: Executor>(
    m: &TrainingMatrix,
    train: &[SampleKey],
    test: &[SampleKey],
    cfg: &RunConfig,
    seed: u64,
    exec: &E,
) -> Result<(Metrics, ModelParams, f64, Model)> {
    let train_m = m.subset(&rows_for(m, train));
    let test_m = m.subset(&rows_for(m, test));
    let cv = tune(&train_m, cfg, mix_seed(seed, 1), exec)?;
    let model = fit_model(&train_m, cv.best(), mix_seed(seed, 2))?;
    let pred = model.predict_matrix(&test_m)?;
    Ok((
        compute_metrics(test_m.targets(), &pred)?,
        *cv.best(),
        cv.rows[cv.best_index].mean_rmse,
        model,
    ))
}

/// Models PM2.5 from the quality-weighted fused AOD and compares it with each
/// product on their co-valid station-days.
pub fn run_data_level<E: Executor>(
    dataset: &Dataset,
    cfg: &RunConfig,
    exec: &E,
) -> Result<DataLevelReport> {
    let fused = dataset.training_rows(None)?.matrix;
    let keys: Vec<SampleKey> = fused.keys().to_vec();
    let (train, test) = split_keys(&keys, cfg.split_ratio, mix_seed(cfg.seed, 500))?;
    let (metrics, best, cv_rmse, model) =
        fit_and_score(&fused, &train, &test, cfg, mix_seed(cfg.seed, 501), exec)?;

    let mut comparisons = Vec::new();
    for p in dataset.products.iter() {
        let pm = dataset.training_rows(Some(p))?.matrix;
        let shared = covalid_keys(&[&fused, &pm]);
        let pseed = mix_seed(cfg.seed, 600 + p.index() as u64);
        let (tr, te) = split_keys(&shared, cfg.split_ratio, pseed)?;
        let (product_metrics, product_best, _, _) =
            fit_and_score(&pm, &tr, &te, cfg, mix_seed(pseed, 1), exec)?;
        let (fused_metrics, fused_best, _, _) =
            fit_and_score(&fused, &tr, &te, cfg, mix_seed(pseed, 1), exec)?;
        comparisons.push(PairedComparison {
            product: p,
            n_train: tr.len(),
            n_test: te.len(),
            product_metrics,
            fused_metrics,
            product_coverage: dataset.coverage(Some(p))?,
            product_best,
            fused_best,
        });
    }
    Ok(DataLevelReport {
        metrics,
        coverage: dataset.coverage(None)?,
        n_train: train.len(),
        n_test: test.len(),
        best,
        cv_rmse,
        model,
        matrix: fused,
        comparisons,
    })
}
