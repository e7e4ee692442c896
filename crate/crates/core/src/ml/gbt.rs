use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::matrix::TrainingMatrix;
use super::tree::{grow, Presorted, RegressionTree, TreeParams};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Squared-error gradient boosting settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub subsample: f64,
    pub min_samples_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_trees: 100,
            max_depth: 3,
            learning_rate: 0.1,
            subsample: 1.0,
            min_samples_leaf: 3,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.learning_rate) {
            return Err(Error::Hyperparams(format!(
                "learning_rate {} outside [0, 1]",
                self.learning_rate
            )));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::Hyperparams(format!(
                "subsample {} outside (0, 1]",
                self.subsample
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Hyperparams(
                "min_samples_leaf must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Cartesian hyperparameter grid, expanded with `n_trees` varying slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct GbtGrid {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub subsample: Vec<f64>,
    pub min_samples_leaf: Vec<usize>,
}

impl Default for GbtGrid {
    fn default() -> Self {
        GbtGrid {
            n_trees: vec![100, 300],
            max_depth: vec![3, 5, 7],
            learning_rate: vec![0.05, 0.1],
            subsample: vec![0.8, 1.0],
            min_samples_leaf: vec![3],
        }
    }
}

impl GbtGrid {
    pub fn expand(&self) -> Vec<GbtParams> {
        let mut out = Vec::new();
        for &n_trees in &self.n_trees {
            for &max_depth in &self.max_depth {
                for &learning_rate in &self.learning_rate {
                    for &subsample in &self.subsample {
                        for &min_samples_leaf in &self.min_samples_leaf {
                            out.push(GbtParams {
                                n_trees,
                                max_depth,
                                learning_rate,
                                subsample,
                                min_samples_leaf,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbtModel {
    pub params: GbtParams,
    pub seed: u64,
    pub n_features: usize,
    pub base_score: f64,
    pub trees: Vec<RegressionTree>,
}

impl GbtModel {
    /// `base_score + learning_rate * Σ tree(x)`; the caller checks arity.
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut sum = 0.0;
        for t in &self.trees {
            sum += t.predict(x);
        }
        self.base_score + self.params.learning_rate * sum
    }
}

pub fn fit_gbt(m: &TrainingMatrix, params: &GbtParams, seed: u64) -> Result<GbtModel> {
    params.validate()?;
    if m.is_empty() {
        return Err(Error::Empty("training matrix has no rows".into()));
    }
    let n = m.n_rows();
    let a = m.n_features();
    let x = m.features();
    let y = m.targets();
    let base_score = y.iter().sum::<f64>() / n as f64;
    let mut model = GbtModel {
        params: *params,
        seed,
        n_features: a,
        base_score,
        trees: Vec::new(),
    };
    if params.learning_rate == 0.0 {
        return Ok(model);
    }

    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: None,
    };
    let sorted = Presorted::new(x, n, a);
    let mut rng = Rng::new(seed);
    let take = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let mut pred = vec![base_score; n];
    let mut residual = vec![0.0; n];
    let mut counts = vec![1u32; n];
    for _ in 0..params.n_trees {
        for i in 0..n {
            residual[i] = y[i] - pred[i];
        }
        if take < n {
            counts.iter_mut().for_each(|c| *c = 0);
            for i in rng.sample_indices(n, take) {
                counts[i] = 1;
            }
        }
        let tree = grow(x, a, &residual, &counts, &sorted, &tree_params, None);
        for (i, p) in pred.iter_mut().enumerate() {
            *p += params.learning_rate * tree.predict(m.row(i));
        }
        model.trees.push(tree);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::tree::Node;

    #[test]
    fn two_point_stump() {
        let m = TrainingMatrix::from_xy(1, vec![0.0, 1.0], vec![0.0, 10.0]).unwrap();
        let p = GbtParams {
            n_trees: 1,
            max_depth: 1,
            learning_rate: 1.0,
            subsample: 1.0,
            min_samples_leaf: 1,
        };
        let g = fit_gbt(&m, &p, 0).unwrap();
        assert_eq!(g.base_score, 5.0);
        assert_eq!(g.trees[0].nodes()[1], Node::Leaf { value: -5.0 });
        assert_eq!(g.trees[0].nodes()[2], Node::Leaf { value: 5.0 });
        assert_eq!(g.predict_row(&[0.0]), 0.0);
        assert_eq!(g.predict_row(&[1.0]), 10.0);
    }

    #[test]
    fn zero_learning_rate_is_constant() {
        let m = TrainingMatrix::from_xy(1, vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 6.0]).unwrap();
        let p = GbtParams {
            learning_rate: 0.0,
            min_samples_leaf: 1,
            ..GbtParams::default()
        };
        let g = fit_gbt(&m, &p, 0).unwrap();
        assert_eq!(g.predict_row(&[0.0]), 3.0);
        assert_eq!(g.predict_row(&[2.0]), 3.0);
    }

    #[test]
    fn rejects_invalid_hyperparams() {
        let m = TrainingMatrix::from_xy(1, vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        for p in [
            GbtParams {
                learning_rate: 1.5,
                ..GbtParams::default()
            },
            GbtParams {
                subsample: 0.0,
                ..GbtParams::default()
            },
            GbtParams {
                min_samples_leaf: 0,
                ..GbtParams::default()
            },
        ] {
            assert!(matches!(fit_gbt(&m, &p, 0), Err(Error::Hyperparams(_))));
        }
    }

    #[test]
    fn default_grid_has_24_points() {
        let g = GbtGrid::default().expand();
        assert_eq!(g.len(), 24);
        assert_eq!(g[0].n_trees, 100);
        assert_eq!(g[23].n_trees, 300);
    }

    #[test]
    fn subsampling_is_seeded() {
        let mut rng = Rng::new(1);
        let x: Vec<f64> = (0..200).map(|_| rng.uniform()).collect();
        let y: Vec<f64> = x.iter().map(|v| v * 3.0 + rng.uniform()).collect();
        let m = TrainingMatrix::from_xy(1, x, y).unwrap();
        let p = GbtParams {
            n_trees: 20,
            subsample: 0.5,
            ..GbtParams::default()
        };
        assert_eq!(fit_gbt(&m, &p, 9).unwrap(), fit_gbt(&m, &p, 9).unwrap());
        assert_ne!(fit_gbt(&m, &p, 9).unwrap(), fit_gbt(&m, &p, 10).unwrap());
    }
}
