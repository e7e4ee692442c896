use alloc::vec;
use alloc::vec::Vec;

use super::gbt::{fit_gbt, GbtParams};
use super::matrix::TrainingMatrix;
use super::metrics::compute_metrics;
use super::model::{fit_model, ModelParams, Regressor};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct CvRow {
    pub params: ModelParams,
    pub fold_rmse: Vec<f64>,
    pub mean_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub best_index: usize,
    pub rows: Vec<CvRow>,
}

impl CvResult {
    pub fn best(&self) -> &ModelParams {
        &self.rows[self.best_index].params
    }
}

/// Fold id per row: position in a seeded permutation, modulo `k`.
pub fn kfold_assign(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut order);
    let mut fold = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        fold[row] = pos % k;
    }
    fold
}

/// Grid points that differ only in the number of boosting rounds share one
/// fit per fold: a GBT with `n` trees is exactly the first `n` trees of a
/// longer fit with the same seed, so shorter models are scored from staged
/// predictions.
fn staged_groups(grid: &[ModelParams]) -> Vec<Vec<usize>> {
    let mut groups: Vec<(Option<ModelParams>, Vec<usize>)> = Vec::new();
    for (g, p) in grid.iter().enumerate() {
        let key = match p {
            ModelParams::Gbt(gp) => Some(ModelParams::Gbt(GbtParams { n_trees: 0, ..*gp })),
            _ => None,
        };
        match groups.iter_mut().find(|(k, _)| key.is_some() && *k == key) {
            Some((_, members)) => members.push(g),
            None => groups.push((key, vec![g])),
        }
    }
    groups.into_iter().map(|(_, m)| m).collect()
}

fn score_group(
    grid: &[ModelParams],
    members: &[usize],
    train: &TrainingMatrix,
    valid: &TrainingMatrix,
    seed: u64,
) -> Result<Vec<f64>> {
    let ModelParams::Gbt(first) = grid[members[0]] else {
        let model = fit_model(train, &grid[members[0]], seed)?;
        let pred = model.predict_matrix(valid)?;
        return Ok(vec![compute_metrics(valid.targets(), &pred)?.rmse]);
    };
    let rounds = |g: usize| match grid[g] {
        ModelParams::Gbt(p) => p.n_trees,
        _ => unreachable!("GBT group"),
    };
    let longest = members
        .iter()
        .map(|&g| rounds(g))
        .max()
        .expect("nonempty group");
    let model = fit_gbt(
        train,
        &GbtParams {
            n_trees: longest,
            ..first
        },
        seed,
    )?;
    let mut sums = vec![0.0; valid.n_rows()];
    let mut done = 0;
    let mut by_rounds: Vec<(usize, f64)> = Vec::new();
    let mut wanted: Vec<usize> = members.iter().map(|&g| rounds(g)).collect();
    wanted.sort_unstable();
    wanted.dedup();
    for t in wanted {
        for tree in &model.trees[done.min(model.trees.len())..t.min(model.trees.len())] {
            for (i, s) in sums.iter_mut().enumerate() {
                *s += tree.predict(valid.row(i));
            }
        }
        done = t;
        let pred: Vec<f64> = sums
            .iter()
            .map(|s| model.base_score + first.learning_rate * s)
            .collect();
        by_rounds.push((t, compute_metrics(valid.targets(), &pred)?.rmse));
    }
    Ok(members
        .iter()
        .map(|&g| {
            by_rounds
                .iter()
                .find(|(t, _)| *t == rounds(g))
                .expect("scored")
                .1
        })
        .collect())
}

/// Grid search by k-fold validation RMSE. Every (grid group, fold) fit is an
/// independent work item; the lowest mean RMSE wins, earlier grid points on
/// ties.
pub fn kfold_cv<E: Executor>(
    m: &TrainingMatrix,
    grid: &[ModelParams],
    k: usize,
    seed: u64,
    exec: &E,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::Empty("hyperparameter grid is empty".into()));
    }
    if k < 2 {
        return Err(Error::validation("cv folds", "k must be at least 2"));
    }
    let n = m.n_rows();
    if n < k {
        return Err(Error::InsufficientData { needed: k, got: n });
    }
    let fold = kfold_assign(n, k, seed);
    let splits: Vec<(TrainingMatrix, TrainingMatrix)> = (0..k)
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| fold[i] != f).collect();
            let valid: Vec<usize> = (0..n).filter(|&i| fold[i] == f).collect();
            (m.subset(&train), m.subset(&valid))
        })
        .collect();
    let groups = staged_groups(grid);
    let scores: Vec<Result<Vec<f64>>> = exec.map(groups.len() * k, |job| {
        let (gi, f) = (job / k, job % k);
        let (train, valid) = &splits[f];
        score_group(grid, &groups[gi], train, valid, seed)
    });
    let mut fold_rmse = vec![vec![0.0; k]; grid.len()];
    for (job, r) in scores.into_iter().enumerate() {
        let (gi, f) = (job / k, job % k);
        for (&g, rmse) in groups[gi].iter().zip(r?) {
            fold_rmse[g][f] = rmse;
        }
    }
    let mut rows = Vec::with_capacity(grid.len());
    let mut best_index = 0;
    for (g, (params, fold_rmse)) in grid.iter().zip(fold_rmse).enumerate() {
        let mean_rmse = fold_rmse.iter().sum::<f64>() / k as f64;
        if mean_rmse
            < rows
                .get(best_index)
                .map_or(f64::INFINITY, |r: &CvRow| r.mean_rmse)
        {
            best_index = g;
        }
        rows.push(CvRow {
            params: *params,
            fold_rmse,
            mean_rmse,
        });
    }
    Ok(CvResult { best_index, rows })
}
