use aeromix_core::dataset::{Dataset, DatasetConfig};
use aeromix_core::fusion::{
    canonical_scenarios, fuse_weighted, quality_weight, run_scenario, run_scenarios, RunConfig,
    Stacking,
};
use aeromix_core::grid::geometry;
use aeromix_core::ml::{
    fit_gbt, fit_tree, GbtParams, ModelParams, Node, TrainingMatrix, TreeParams,
};
use aeromix_core::preprocess::{correct_pm25, invert_pm25_correction};
use aeromix_core::synth::{generate_scene, Degradation, SceneConfig};
use aeromix_core::{Product, Sequential};
use proptest::prelude::*;

fn small_dataset(seed: u64) -> Dataset {
    let mut sc = SceneConfig::new(seed);
    sc.geometry = geometry(24, 24, 500_000.0, 3_900_000.0, 1000.0);
    sc.n_days = 15;
    sc.n_stations = 12;
    sc.met.spacing = 6;
    let noisy = |validity| Degradation {
        validity,
        ..Degradation::NONE
    };
    sc.products = [
        (Product::Mdb, noisy(0.7)),
        (Product::Mdt, noisy(0.6)),
        (Product::Vdb, noisy(0.75)),
        (Product::Vdt, noisy(0.5)),
    ]
    .into_iter()
    .collect();
    let scene = generate_scene(&sc).unwrap();
    let cfg = DatasetConfig {
        products: sc.product_set(),
        ..Default::default()
    };
    Dataset::build(&scene.grids, &scene.stations, &scene.met, &cfg, &Sequential).unwrap()
}

fn small_run() -> RunConfig {
    RunConfig {
        grid: [3, 4]
            .into_iter()
            .map(|d| {
                ModelParams::Gbt(GbtParams {
                    n_trees: 15,
                    max_depth: d,
                    ..Default::default()
                })
            })
            .collect(),
        folds: 3,
        stacking: Stacking::OutOfFold(3),
        ..Default::default()
    }
}

#[test]
fn batch_run_equals_standalone_runs() {
    let ds = small_dataset(11);
    let rc = small_run();
    let scenarios = canonical_scenarios();
    let batch = run_scenarios(&scenarios, &ds, &rc, &Sequential).unwrap();
    assert_eq!(batch.len(), 11);
    for (s, r) in scenarios.iter().zip(&batch) {
        assert_eq!(
            *r,
            run_scenario(s, &ds, &rc, &Sequential).unwrap(),
            "scenario {}",
            s.id
        );
    }
}

#[test]
fn scenario_reports_are_paired_and_cover_the_union() {
    let ds = small_dataset(12);
    let rc = small_run();
    for r in run_scenarios(&canonical_scenarios(), &ds, &rc, &Sequential).unwrap() {
        assert!(r.keys_paired(), "scenario {}", r.scenario.id);
        assert_eq!(r.n_train + r.n_test, {
            let mut keys = r.model.stacking.keys.clone();
            keys.extend(r.test_keys.iter().cloned());
            keys.sort();
            keys.dedup();
            keys.len()
        });
        let best = r.products.iter().map(|p| p.coverage).fold(0.0, f64::max);
        assert!(r.fused_coverage >= best);
        assert_eq!(r.products.len(), r.scenario.products.len());
        assert_eq!(r.combiner.coefficients.len(), r.scenario.products.len());
    }
}

fn leaf_rows(
    nodes: &[Node],
    x: &[f64],
    a: usize,
    n: usize,
) -> std::collections::BTreeMap<usize, usize> {
    let mut per_leaf = std::collections::BTreeMap::new();
    for i in 0..n {
        let mut at = 0;
        while let Node::Split {
            feature,
            threshold,
            left,
            right,
        } = &nodes[at]
        {
            at = if x[i * a + feature] <= *threshold {
                *left
            } else {
                *right
            };
        }
        *per_leaf.entry(at).or_insert(0) += 1;
    }
    per_leaf
}

fn sse(pred: impl Fn(usize) -> f64, y: &[f64]) -> f64 {
    y.iter()
        .enumerate()
        .map(|(i, v)| (v - pred(i)).powi(2))
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trees_respect_leaf_size_and_fit_leaf_means(
        rows in prop::collection::vec((0.0f64..10.0, 0u8..5, 0.0f64..50.0), 8..80),
        depth in 1usize..5,
        leaf in 1usize..6,
    ) {
        let a = 2;
        let n = rows.len();
        let x: Vec<f64> = rows.iter().flat_map(|r| [r.0, r.1 as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let t = fit_tree(&x, a, &y, &TreeParams { max_depth: depth, min_samples_leaf: leaf, max_features: None }).unwrap();
        prop_assert!(t.depth() <= depth);
        let per_leaf = leaf_rows(t.nodes(), &x, a, n);
        prop_assert_eq!(per_leaf.len(), t.n_leaves());
        if t.n_leaves() > 1 {
            prop_assert!(per_leaf.values().all(|&c| c >= leaf));
        }
        // Each leaf predicts the mean of its rows.
        for &at in per_leaf.keys() {
            let Node::Leaf { value } = t.nodes()[at] else { unreachable!() };
            let members: Vec<f64> = (0..n)
                .filter(|&i| leaf_rows(t.nodes(), &x[i * a..(i + 1) * a], a, 1).contains_key(&at))
                .map(|i| y[i])
                .collect();
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            prop_assert!((value - mean).abs() <= 1e-9 * mean.abs().max(1.0));
        }
    }

    #[test]
    fn deeper_trees_never_fit_worse(
        rows in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0, 0.0f64..50.0), 10..60),
    ) {
        let a = 2;
        let x: Vec<f64> = rows.iter().flat_map(|r| [r.0, r.1]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let mut prev = f64::INFINITY;
        for depth in 0..5 {
            let t = fit_tree(&x, a, &y, &TreeParams { max_depth: depth, min_samples_leaf: 1, max_features: None }).unwrap();
            let e = sse(|i| t.predict(&x[i * a..(i + 1) * a]), &y);
            prop_assert!(e <= prev * (1.0 + 1e-12) + 1e-9);
            prev = e;
        }
    }

    #[test]
    fn boosting_is_seed_deterministic(
        rows in prop::collection::vec((0.0f64..10.0, 0.0f64..50.0), 10..60),
        seed in any::<u64>(),
    ) {
        let x: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let m = TrainingMatrix::from_xy(1, x, y).unwrap();
        let p = GbtParams { n_trees: 8, subsample: 0.7, min_samples_leaf: 1, ..Default::default() };
        prop_assert_eq!(fit_gbt(&m, &p, seed).unwrap(), fit_gbt(&m, &p, seed).unwrap());
    }

    #[test]
    fn humidity_correction_round_trips(pm in 0.0f64..500.0, rh in 0.0f64..98.9) {
        let c = correct_pm25(pm, rh, 99.0).unwrap();
        prop_assert!(c >= pm);
        let back = invert_pm25_correction(c, rh, 99.0);
        prop_assert!((back - pm).abs() <= 1e-9 * pm.max(1.0));
    }

    #[test]
    fn quality_weight_counts_best_codes(codes in prop::array::uniform9(prop::option::of(0u8..4))) {
        let w = quality_weight(&codes);
        let best = codes.iter().filter(|c| **c == Some(3)).count();
        prop_assert_eq!(w, best as f64 / 9.0);
    }

    #[test]
    fn weighted_fusion_stays_within_inputs(items in prop::collection::vec((0.0f64..3.0, 0u8..10), 1..5)) {
        let items: Vec<(f64, f64)> = items.iter().map(|(v, w)| (*v, *w as f64 / 9.0)).collect();
        let live: Vec<f64> = items.iter().filter(|i| i.1 > 0.0).map(|i| i.0).collect();
        match fuse_weighted(&items) {
            None => prop_assert!(live.is_empty()),
            Some(f) => {
                let lo = live.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = live.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(f >= lo - 1e-12 && f <= hi + 1e-12);
            }
        }
    }
}
