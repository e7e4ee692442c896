use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use super::scenario::FusionScenario;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::grid::{Product, ProductSet};
use crate::ml::{
    fit_linear, kfold_assign, FitCache, Model, ModelParams, Regressor, TrainingMatrix,
};
use crate::records::SampleKey;
use crate::rng::mix_seed;

/// Per-product base-model estimates at one point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecisionVector(pub BTreeMap<Product, f64>);

impl DecisionVector {
    pub fn products(&self) -> ProductSet {
        self.0.keys().copied().collect()
    }
}

impl FromIterator<(Product, f64)> for DecisionVector {
    fn from_iter<I: IntoIterator<Item = (Product, f64)>>(iter: I) -> Self {
        DecisionVector(iter.into_iter().collect())
    }
}

/// `Σ Aᵢ·fᵢ + B` over a fixed product subset.
#[derive(Debug, Clone, PartialEq)]
pub struct Combiner {
    pub products: ProductSet,
    /// One per member of `products`, in canonical product order.
    pub coefficients: Vec<f64>,
    pub bias: f64,
}

impl Combiner {
    pub fn identity(product: Product) -> Combiner {
        Combiner {
            products: core::iter::once(product).collect(),
            coefficients: alloc::vec![1.0],
            bias: 0.0,
        }
    }

    /// Least squares of `targets` on the decision columns (row-major,
    /// canonical product order), minimum-norm under collinearity.
    pub fn fit(products: ProductSet, decisions: &[f64], targets: &[f64]) -> Result<Combiner> {
        let lm = fit_linear(decisions, products.len(), targets)?;
        Ok(Combiner {
            products,
            coefficients: lm.coefficients,
            bias: lm.bias,
        })
    }

    pub fn apply(&self, d: &DecisionVector) -> Result<f64> {
        let mut s = self.bias;
        for (p, a) in self.products.iter().zip(&self.coefficients) {
            let f = d.0.get(&p).ok_or(Error::MissingDecision(p))?;
            s += a * f;
        }
        Ok(s)
    }
}

/// How training decisions for the combiner are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stacking {
    /// Each co-valid training row is scored by a base model that did not see
    /// it (k folds).
    OutOfFold(usize),
    /// Base models score their own training rows.
    InSample,
}

/// Decisions and targets the full-scenario combiner was fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct StackingSet {
    pub keys: Vec<SampleKey>,
    /// Row-major, canonical product order.
    pub decisions: Vec<f64>,
    pub targets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionFusionModel {
    pub scenario: FusionScenario,
    pub base: BTreeMap<Product, Model>,
    /// One combiner per nonempty product subset that could be fitted; the
    /// full scenario set is always present.
    pub combiners: BTreeMap<ProductSet, Combiner>,
    pub stacking: StackingSet,
}

impl DecisionFusionModel {
    pub fn combiner(&self) -> &Combiner {
        &self.combiners[&self.scenario.products]
    }

    /// Linear-combiner estimate with every scenario product present.
    pub fn apply(&self, d: &DecisionVector) -> Result<f64> {
        self.combiner().apply(d)
    }

    /// Estimate from whichever scenario products are present: the combiner of
    /// the largest available subset (ties by bitmask) is used.
    pub fn apply_available(&self, d: &DecisionVector) -> Option<f64> {
        let present = d.products();
        let avail = ProductSet::from_bits(present.bits() & self.scenario.products.bits());
        let mut subsets = avail.nonempty_subsets();
        subsets.sort_by(|a, b| b.len().cmp(&a.len()).then(a.bits().cmp(&b.bits())));
        subsets
            .into_iter()
            .find_map(|s| self.combiners.get(&s))
            .and_then(|c| c.apply(d).ok())
    }

    /// Base-model decision for one product's feature row.
    pub fn decide(&self, product: Product, features: &[f64]) -> Result<f64> {
        self.base
            .get(&product)
            .ok_or(Error::MissingDecision(product))?
            .predict(features)
    }
}

fn key_index(m: &TrainingMatrix) -> BTreeMap<&SampleKey, usize> {
    m.keys().iter().enumerate().map(|(i, k)| (k, i)).collect()
}

/// Trains one base model per scenario product on the keys where all scenario
/// products are valid, then fits the linear combiner and the fallback
/// combiners for every product subset.
///
/// `matrices` must already exclude evaluation keys. Rows valid for only some
/// products are used for the fallback combiners of those subsets.
pub fn train_decision_fusion<E: Executor>(
    scenario: &FusionScenario,
    matrices: &BTreeMap<Product, TrainingMatrix>,
    params: &BTreeMap<Product, ModelParams>,
    stacking: Stacking,
    seed: u64,
    exec: &E,
) -> Result<DecisionFusionModel> {
    train_decision_fusion_cached(
        scenario,
        matrices,
        params,
        stacking,
        seed,
        exec,
        &mut FitCache::new(),
    )
}

/// [`train_decision_fusion`] drawing base-model fits from `cache`.
pub fn train_decision_fusion_cached<E: Executor>(
    scenario: &FusionScenario,
    matrices: &BTreeMap<Product, TrainingMatrix>,
    params: &BTreeMap<Product, ModelParams>,
    stacking: Stacking,
    seed: u64,
    exec: &E,
    cache: &mut FitCache,
) -> Result<DecisionFusionModel> {
    let products: Vec<Product> = scenario.products.iter().collect();
    if products.is_empty() {
        return Err(Error::validation("scenario", "no products"));
    }
    for p in &products {
        if !matrices.contains_key(p) || !params.contains_key(p) {
            return Err(Error::MissingDecision(*p));
        }
    }
    let index: BTreeMap<Product, BTreeMap<&SampleKey, usize>> = products
        .iter()
        .map(|p| (*p, key_index(&matrices[p])))
        .collect();
    let covalid: Vec<&SampleKey> = index[&products[0]]
        .keys()
        .copied()
        .filter(|k| products.iter().all(|p| index[p].contains_key(*k)))
        .collect();
    if covalid.is_empty() {
        return Err(Error::Empty(alloc::format!(
            "no training key where all of {} are valid",
            scenario.products
        )));
    }
    let rows_of = |p: Product, keys: &[&SampleKey]| -> Vec<usize> {
        keys.iter().map(|k| index[&p][*k]).collect()
    };
    let base_seed = |p: Product| mix_seed(seed, p.index() as u64);

    let jobs: Vec<(TrainingMatrix, ModelParams, u64)> = products
        .iter()
        .map(|&p| {
            (
                matrices[&p].subset(&rows_of(p, &covalid)),
                params[&p],
                base_seed(p),
            )
        })
        .collect();
    let base: BTreeMap<Product, Model> = products
        .iter()
        .copied()
        .zip(cache.fit_all(&jobs, exec)?)
        .collect();

    // Decisions on every training row of each product.
    let mut decisions: BTreeMap<Product, BTreeMap<SampleKey, f64>> = BTreeMap::new();
    for &p in &products {
        let m = &matrices[&p];
        let model = &base[&p];
        let d = (0..m.n_rows())
            .map(|i| (m.keys()[i].clone(), model.predict_row(m.row(i))))
            .collect();
        decisions.insert(p, d);
    }
    if let Stacking::OutOfFold(k) = stacking {
        let k = k.max(2);
        if covalid.len() >= k {
            let fold = kfold_assign(covalid.len(), k, mix_seed(seed, 0x57ac));
            let mut jobs = Vec::with_capacity(products.len() * k);
            let mut held: Vec<Vec<&SampleKey>> = Vec::with_capacity(k);
            for f in 0..k {
                held.push(
                    covalid
                        .iter()
                        .zip(&fold)
                        .filter(|(_, &g)| g == f)
                        .map(|(k, _)| *k)
                        .collect(),
                );
            }
            for &p in &products {
                for f in 0..k {
                    let train: Vec<&SampleKey> = covalid
                        .iter()
                        .zip(&fold)
                        .filter(|(_, &g)| g != f)
                        .map(|(k, _)| *k)
                        .collect();
                    jobs.push((
                        matrices[&p].subset(&rows_of(p, &train)),
                        params[&p],
                        base_seed(p),
                    ));
                }
            }
            let models = cache.fit_all(&jobs, exec)?;
            for (job, model) in models.iter().enumerate() {
                let (p, f) = (products[job / k], job % k);
                let m = &matrices[&p];
                let d = decisions.get_mut(&p).expect("product present");
                for key in &held[f] {
                    d.insert((*key).clone(), model.predict_row(m.row(index[&p][*key])));
                }
            }
        }
    }

    let target_of = |key: &SampleKey| -> f64 {
        let p = products
            .iter()
            .find(|p| index[p].contains_key(key))
            .expect("key from some matrix");
        matrices[p].targets()[index[p][key]]
    };

    let mut combiners = BTreeMap::new();
    let mut stacking_set = None;
    for subset in scenario.products.nonempty_subsets() {
        if subset.len() == 1 {
            let p = subset.iter().next().expect("one member");
            combiners.insert(subset, Combiner::identity(p));
            continue;
        }
        let members: Vec<Product> = subset.iter().collect();
        let keys: BTreeSet<&SampleKey> = index[&members[0]]
            .keys()
            .copied()
            .filter(|k| members.iter().all(|p| index[p].contains_key(*k)))
            .collect();
        let mut x = Vec::with_capacity(keys.len() * members.len());
        let mut y = Vec::with_capacity(keys.len());
        for key in &keys {
            for p in &members {
                x.push(decisions[p][*key]);
            }
            y.push(target_of(key));
        }
        match Combiner::fit(subset, &x, &y) {
            Ok(c) => {
                combiners.insert(subset, c);
            }
            Err(e) if subset == scenario.products => return Err(e),
            Err(_) => {}
        }
        if subset == scenario.products {
            stacking_set = Some(StackingSet {
                keys: keys.iter().map(|k| (*k).clone()).collect(),
                decisions: x,
                targets: y,
            });
        }
    }
    let stacking = match stacking_set {
        Some(s) => s,
        None => {
            // Single-product scenario: the identity combiner on base decisions.
            let p = products[0];
            let keys: Vec<SampleKey> = covalid.iter().map(|k| (*k).clone()).collect();
            StackingSet {
                decisions: keys.iter().map(|k| decisions[&p][k]).collect(),
                targets: keys.iter().map(target_of).collect(),
                keys,
            }
        }
    };
    Ok(DecisionFusionModel {
        scenario: *scenario,
        base,
        combiners,
        stacking,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::ml::GbtParams;
    use crate::rng::Rng;
    use crate::Date;
    use alloc::format;
    use alloc::string::String;
    use alloc::vec;

    fn set(ps: &[Product]) -> ProductSet {
        ps.iter().copied().collect()
    }

    #[test]
    fn apply_examples() {
        let one = Combiner::identity(Product::Mdb);
        let d: DecisionVector = [(Product::Mdb, 42.0)].into_iter().collect();
        assert_eq!(one.apply(&d).unwrap(), 42.0);

        let two = Combiner {
            products: set(&[Product::Mdb, Product::Vdb]),
            coefficients: vec![0.5, 0.5],
            bias: 0.0,
        };
        let d: DecisionVector = [(Product::Mdb, 10.0), (Product::Vdb, 20.0)]
            .into_iter()
            .collect();
        assert_eq!(two.apply(&d).unwrap(), 15.0);
        let shifted = Combiner {
            coefficients: vec![1.0, 1.0],
            bias: 5.0,
            ..two.clone()
        };
        assert_eq!(shifted.apply(&d).unwrap(), 35.0);
        let partial: DecisionVector = [(Product::Mdb, 10.0)].into_iter().collect();
        assert_eq!(
            two.apply(&partial),
            Err(Error::MissingDecision(Product::Vdb))
        );
    }

    #[test]
    fn identity_fit_when_decisions_equal_targets() {
        let y: Vec<f64> = (0..20).map(|i| (i * i) as f64 * 0.3 + 1.0).collect();
        let c = Combiner::fit(set(&[Product::Vdb]), &y, &y).unwrap();
        assert!((c.coefficients[0] - 1.0).abs() < 1e-8);
        assert!(c.bias.abs() < 1e-8);
    }

    fn matrix(
        keys: &[SampleKey],
        feature: impl Fn(usize) -> f64,
        target: impl Fn(usize) -> f64,
    ) -> TrainingMatrix {
        let names: Vec<String> = vec!["AOD".into(), "X".into()];
        let mut x = Vec::new();
        for i in 0..keys.len() {
            x.push(feature(i));
            x.push(i as f64 * 0.01);
        }
        TrainingMatrix::new(
            names,
            x,
            (0..keys.len()).map(target).collect(),
            keys.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn trains_one_base_model_per_product_and_fallbacks() {
        let d0 = Date::from_ymd_opt(2020, 1, 1).unwrap();
        let keys: Vec<SampleKey> = (0..120)
            .map(|i| SampleKey::new(format!("s{i:03}"), d0))
            .collect();
        let mut rng = Rng::new(5);
        let truth: Vec<f64> = (0..120).map(|_| 20.0 + 30.0 * rng.uniform()).collect();
        let noise_a: Vec<f64> = (0..120).map(|_| rng.normal()).collect();
        let noise_b: Vec<f64> = (0..120).map(|_| 3.0 * rng.normal()).collect();
        // Product B misses the last 20 keys.
        let a = matrix(&keys, |i| truth[i] + noise_a[i], |i| truth[i]);
        let b = matrix(&keys[..100], |i| truth[i] + noise_b[i], |i| truth[i]);
        let mut matrices = BTreeMap::new();
        matrices.insert(Product::Mdb, a);
        matrices.insert(Product::Vdb, b);
        let p = ModelParams::Gbt(GbtParams {
            n_trees: 30,
            ..GbtParams::default()
        });
        let params: BTreeMap<Product, ModelParams> =
            [(Product::Mdb, p), (Product::Vdb, p)].into_iter().collect();
        let scenario = FusionScenario::canonical(1).unwrap();
        let model = train_decision_fusion(
            &scenario,
            &matrices,
            &params,
            Stacking::OutOfFold(5),
            3,
            &Sequential,
        )
        .unwrap();
        assert_eq!(model.base.len(), 2);
        assert_eq!(model.combiners.len(), 3);
        assert_eq!(model.stacking.keys.len(), 100);

        // Stacked SSE never exceeds any single column's SSE on the same rows.
        let s = &model.stacking;
        let c = model.combiner();
        let sse = |f: &dyn Fn(usize) -> f64| -> f64 {
            (0..s.targets.len())
                .map(|i| (s.targets[i] - f(i)).powi(2))
                .sum()
        };
        let fused = sse(&|i| {
            c.bias
                + c.coefficients[0] * s.decisions[2 * i]
                + c.coefficients[1] * s.decisions[2 * i + 1]
        });
        assert!(fused <= sse(&|i| s.decisions[2 * i]) * (1.0 + 1e-9));
        assert!(fused <= sse(&|i| s.decisions[2 * i + 1]) * (1.0 + 1e-9));

        let only_a: DecisionVector = [(Product::Mdb, 30.0)].into_iter().collect();
        assert_eq!(model.apply_available(&only_a), Some(30.0));
        assert!(model.apply(&only_a).is_err());
        assert_eq!(model.apply_available(&DecisionVector::default()), None);

        let again = train_decision_fusion(
            &scenario,
            &matrices,
            &params,
            Stacking::OutOfFold(5),
            3,
            &Sequential,
        )
        .unwrap();
        assert_eq!(again, model);
    }
}
