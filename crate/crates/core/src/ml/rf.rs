use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::matrix::TrainingMatrix;
use super::tree::{grow, Presorted, RegressionTree, TreeParams};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxFeatures {
    All,
    /// `ceil(sqrt(arity))`.
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, arity: usize) -> usize {
        match self {
            MaxFeatures::All => arity,
            MaxFeatures::Sqrt => {
                let mut k = 0;
                while k * k < arity {
                    k += 1;
                }
                k.max(1)
            }
            MaxFeatures::Count(k) => k.clamp(1, arity),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RfParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            n_trees: 100,
            max_depth: 12,
            min_samples_leaf: 2,
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
        }
    }
}

impl RfParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Hyperparams(
                "random forest needs at least one tree".into(),
            ));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Hyperparams(
                "min_samples_leaf must be at least 1".into(),
            ));
        }
        if self.max_features == MaxFeatures::Count(0) {
            return Err(Error::Hyperparams(format!(
                "max_features {:?}",
                self.max_features
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RfModel {
    pub params: RfParams,
    pub seed: u64,
    pub n_features: usize,
    pub trees: Vec<RegressionTree>,
}

impl RfModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut sum = 0.0;
        for t in &self.trees {
            sum += t.predict(x);
        }
        sum / self.trees.len() as f64
    }
}

pub fn fit_rf(m: &TrainingMatrix, params: &RfParams, seed: u64) -> Result<RfModel> {
    params.validate()?;
    if m.is_empty() {
        return Err(Error::Empty("training matrix has no rows".into()));
    }
    let n = m.n_rows();
    let a = m.n_features();
    let k = params.max_features.resolve(a);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: if k < a { Some(k) } else { None },
    };
    let sorted = Presorted::new(m.features(), n, a);
    let mut rng = Rng::new(seed);
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut counts = vec![1u32; n];
    for _ in 0..params.n_trees {
        if params.bootstrap {
            counts.iter_mut().for_each(|c| *c = 0);
            for _ in 0..n {
                counts[rng.below(n)] += 1;
            }
        }
        trees.push(grow(
            m.features(),
            a,
            m.targets(),
            &counts,
            &sorted,
            &tree_params,
            Some(&mut rng),
        ));
    }
    Ok(RfModel {
        params: *params,
        seed,
        n_features: a,
        trees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::tree::fit_tree;

    fn data(seed: u64, n: usize, a: usize) -> TrainingMatrix {
        let mut rng = Rng::new(seed);
        let x: Vec<f64> = (0..n * a).map(|_| rng.uniform()).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 20.0 + 10.0 * x[i * a] + 5.0 * rng.uniform())
            .collect();
        TrainingMatrix::from_xy(a, x, y).unwrap()
    }

    #[test]
    fn sqrt_rule() {
        assert_eq!(MaxFeatures::Sqrt.resolve(15), 4);
        assert_eq!(MaxFeatures::Sqrt.resolve(16), 4);
        assert_eq!(MaxFeatures::Sqrt.resolve(1), 1);
    }

    #[test]
    fn degenerate_forest_is_a_single_tree() {
        let m = data(2, 120, 3);
        let p = RfParams {
            n_trees: 1,
            max_depth: 6,
            min_samples_leaf: 2,
            bootstrap: false,
            max_features: MaxFeatures::All,
        };
        let rf = fit_rf(&m, &p, 5).unwrap();
        let tree = fit_tree(
            m.features(),
            3,
            m.targets(),
            &TreeParams {
                max_depth: 6,
                min_samples_leaf: 2,
                max_features: None,
            },
        )
        .unwrap();
        assert_eq!(rf.trees[0], tree);
    }

    #[test]
    fn constant_targets() {
        let x: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let m = TrainingMatrix::from_xy(2, x, vec![7.5; 20]).unwrap();
        let rf = fit_rf(&m, &RfParams::default(), 1).unwrap();
        assert_eq!(rf.predict_row(&[3.0, 100.0]), 7.5);
    }

    #[test]
    fn predictions_stay_within_target_range() {
        let m = data(3, 200, 4);
        let rf = fit_rf(
            &m,
            &RfParams {
                n_trees: 30,
                ..RfParams::default()
            },
            8,
        )
        .unwrap();
        let lo = m.targets().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = m
            .targets()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut rng = Rng::new(77);
        for _ in 0..1000 {
            let q: Vec<f64> = (0..4).map(|_| rng.uniform() * 3.0 - 1.0).collect();
            let p = rf.predict_row(&q);
            assert!(p >= lo && p <= hi);
        }
    }
}
