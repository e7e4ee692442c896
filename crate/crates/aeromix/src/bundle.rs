//! Versioned text bundles for fitted models and decision-fusion models.
//!
//! A model bundle starts with `aeromix-model 1`, followed by `key = value`
//! header lines (kind, hyperparameters, seed, feature count), then the body:
//! preorder tree nodes (`split <feature> <threshold> <left> <right>` or
//! `leaf <value>`) grouped under `tree <n_nodes>` lines, or `coef` and
//! `bias` lines for linear models. A fusion bundle starts with
//! `aeromix-fusion 1` and embeds one model bundle per base product plus the
//! combiners and the stacking rows they were fitted on. Floats are written
//! in shortest round-trip form so a parsed bundle predicts bit-identically.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use aeromix_core::fusion::{Combiner, DecisionFusionModel, FusionScenario, StackingSet};
use aeromix_core::ml::{
    GbtModel, GbtParams, LinearModel, MaxFeatures, Model, Node, RegressionTree, RfModel, RfParams,
};
use aeromix_core::{Date, Product, ProductSet, SampleKey};

use crate::error::{AppError, AppResult};

pub const MODEL_MAGIC: &str = "aeromix-model";
pub const FUSION_MAGIC: &str = "aeromix-fusion";
pub const VERSION: u32 = 1;

pub fn max_features_label(m: MaxFeatures) -> String {
    match m {
        MaxFeatures::All => "all".into(),
        MaxFeatures::Sqrt => "sqrt".into(),
        MaxFeatures::Count(k) => k.to_string(),
    }
}

pub fn parse_max_features(s: &str) -> Option<MaxFeatures> {
    match s {
        "all" => Some(MaxFeatures::All),
        "sqrt" => Some(MaxFeatures::Sqrt),
        _ => s.parse().ok().map(MaxFeatures::Count),
    }
}

fn product_set_label(s: ProductSet) -> String {
    s.iter().map(Product::code).collect::<Vec<_>>().join(",")
}

fn write_trees(out: &mut String, trees: &[RegressionTree]) {
    for t in trees {
        writeln!(out, "tree {}", t.nodes().len()).unwrap();
        for n in t.nodes() {
            match n {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => writeln!(out, "split {feature} {threshold:?} {left} {right}").unwrap(),
                Node::Leaf { value } => writeln!(out, "leaf {value:?}").unwrap(),
            }
        }
    }
}

fn write_model_into(out: &mut String, model: &Model) {
    writeln!(out, "{MODEL_MAGIC} {VERSION}").unwrap();
    match model {
        Model::Gbt(m) => {
            let p = &m.params;
            writeln!(out, "kind = gbt").unwrap();
            writeln!(out, "seed = {}", m.seed).unwrap();
            writeln!(out, "n_features = {}", m.n_features).unwrap();
            writeln!(out, "n_trees = {}", p.n_trees).unwrap();
            writeln!(out, "max_depth = {}", p.max_depth).unwrap();
            writeln!(out, "learning_rate = {:?}", p.learning_rate).unwrap();
            writeln!(out, "subsample = {:?}", p.subsample).unwrap();
            writeln!(out, "min_samples_leaf = {}", p.min_samples_leaf).unwrap();
            writeln!(out, "base_score = {:?}", m.base_score).unwrap();
            writeln!(out, "trees = {}", m.trees.len()).unwrap();
            write_trees(out, &m.trees);
        }
        Model::Rf(m) => {
            let p = &m.params;
            writeln!(out, "kind = rf").unwrap();
            writeln!(out, "seed = {}", m.seed).unwrap();
            writeln!(out, "n_features = {}", m.n_features).unwrap();
            writeln!(out, "n_trees = {}", p.n_trees).unwrap();
            writeln!(out, "max_depth = {}", p.max_depth).unwrap();
            writeln!(out, "min_samples_leaf = {}", p.min_samples_leaf).unwrap();
            writeln!(out, "bootstrap = {}", p.bootstrap).unwrap();
            writeln!(out, "max_features = {}", max_features_label(p.max_features)).unwrap();
            writeln!(out, "trees = {}", m.trees.len()).unwrap();
            write_trees(out, &m.trees);
        }
        Model::Linear(m) => {
            writeln!(out, "kind = linear").unwrap();
            writeln!(out, "n_features = {}", m.coefficients.len()).unwrap();
            let coefs: Vec<String> = m.coefficients.iter().map(|c| format!("{c:?}")).collect();
            writeln!(out, "coef {}", coefs.join(" ")).unwrap();
            writeln!(out, "bias {:?}", m.bias).unwrap();
        }
    }
    writeln!(out, "end-model").unwrap();
}

pub fn model_to_string(model: &Model) -> String {
    let mut out = String::new();
    write_model_into(&mut out, model);
    out
}

pub fn fusion_to_string(m: &DecisionFusionModel) -> String {
    let mut out = String::new();
    writeln!(out, "{FUSION_MAGIC} {VERSION}").unwrap();
    writeln!(out, "scenario = {}", m.scenario.id).unwrap();
    writeln!(out, "products = {}", product_set_label(m.scenario.products)).unwrap();
    for (p, model) in &m.base {
        writeln!(out, "base {p}").unwrap();
        write_model_into(&mut out, model);
    }
    for (set, c) in &m.combiners {
        let coefs: Vec<String> = c.coefficients.iter().map(|v| format!("{v:?}")).collect();
        writeln!(
            out,
            "combiner {} bias {:?} coef {}",
            product_set_label(*set),
            c.bias,
            coefs.join(" ")
        )
        .unwrap();
    }
    let n = m.scenario.products.len();
    writeln!(out, "stacking_rows = {}", m.stacking.keys.len()).unwrap();
    for (i, k) in m.stacking.keys.iter().enumerate() {
        let d: Vec<String> = m.stacking.decisions[i * n..(i + 1) * n]
            .iter()
            .map(|v| format!("{v:?}"))
            .collect();
        writeln!(
            out,
            "row {} {} {:?} {}",
            k.station_id,
            k.date,
            m.stacking.targets[i],
            d.join(" ")
        )
        .unwrap();
    }
    writeln!(out, "end-fusion").unwrap();
    out
}

/// Line cursor that reports errors with the file name and line number.
struct Cursor<'a> {
    path: &'a Path,
    lines: Vec<(usize, &'a str)>,
    at: usize,
}

impl<'a> Cursor<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        Cursor { path, lines, at: 0 }
    }

    fn err(&self, msg: impl std::fmt::Display) -> AppError {
        let line = self.lines.get(self.at.saturating_sub(1)).map_or(0, |l| l.0);
        AppError::parse(self.path, line, msg)
    }

    fn next(&mut self) -> AppResult<&'a str> {
        let l = self.lines.get(self.at).ok_or_else(|| {
            AppError::parse(
                self.path,
                self.lines.last().map_or(0, |l| l.0),
                "unexpected end of bundle",
            )
        })?;
        self.at += 1;
        Ok(l.1)
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.at).map(|l| l.1)
    }

    fn expect_magic(&mut self, magic: &str) -> AppResult<()> {
        let line = self.next()?;
        let mut it = line.split_whitespace();
        if it.next() != Some(magic) {
            return Err(self.err(format!("expected `{magic} {VERSION}`")));
        }
        match it.next().and_then(|v| v.parse::<u32>().ok()) {
            Some(VERSION) => Ok(()),
            Some(v) => Err(self.err(format!("unsupported {magic} version {v}"))),
            None => Err(self.err("missing version")),
        }
    }

    fn field<T: std::str::FromStr>(&mut self, key: &str) -> AppResult<T>
    where
        T::Err: std::fmt::Display,
    {
        let line = self.next()?;
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| self.err(format!("expected `{key} = ...`")))?;
        if k.trim() != key {
            return Err(self.err(format!("expected `{key}`, found `{}`", k.trim())));
        }
        v.trim()
            .parse()
            .map_err(|e| self.err(format!("{key}: {e}")))
    }

    fn num<T: std::str::FromStr>(&self, s: Option<&str>, what: &str) -> AppResult<T>
    where
        T::Err: std::fmt::Display,
    {
        let s = s.ok_or_else(|| self.err(format!("missing {what}")))?;
        s.parse()
            .map_err(|e| self.err(format!("{what} `{s}`: {e}")))
    }
}

fn read_trees(c: &mut Cursor, count: usize, n_features: usize) -> AppResult<Vec<RegressionTree>> {
    let mut trees = Vec::with_capacity(count);
    for _ in 0..count {
        let line = c.next()?;
        let mut it = line.split_whitespace();
        if it.next() != Some("tree") {
            return Err(c.err("expected `tree <n_nodes>`"));
        }
        let n: usize = c.num(it.next(), "node count")?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let line = c.next()?;
            let mut it = line.split_whitespace();
            let node = match it.next() {
                Some("split") => Node::Split {
                    feature: c.num(it.next(), "feature")?,
                    threshold: c.num(it.next(), "threshold")?,
                    left: c.num(it.next(), "left child")?,
                    right: c.num(it.next(), "right child")?,
                },
                Some("leaf") => Node::Leaf {
                    value: c.num(it.next(), "leaf value")?,
                },
                _ => return Err(c.err("expected `split` or `leaf` node")),
            };
            nodes.push(node);
        }
        trees.push(RegressionTree::from_nodes(nodes, n_features).map_err(|e| c.err(e))?);
    }
    Ok(trees)
}

fn read_model(c: &mut Cursor) -> AppResult<Model> {
    c.expect_magic(MODEL_MAGIC)?;
    let kind: String = c.field("kind")?;
    let model = match kind.as_str() {
        "gbt" => {
            let seed = c.field("seed")?;
            let n_features = c.field("n_features")?;
            let params = GbtParams {
                n_trees: c.field("n_trees")?,
                max_depth: c.field("max_depth")?,
                learning_rate: c.field("learning_rate")?,
                subsample: c.field("subsample")?,
                min_samples_leaf: c.field("min_samples_leaf")?,
            };
            params.validate().map_err(|e| c.err(e))?;
            let base_score = c.field("base_score")?;
            let count = c.field("trees")?;
            let trees = read_trees(c, count, n_features)?;
            Model::Gbt(GbtModel {
                params,
                seed,
                n_features,
                base_score,
                trees,
            })
        }
        "rf" => {
            let seed = c.field("seed")?;
            let n_features = c.field("n_features")?;
            let n_trees = c.field("n_trees")?;
            let max_depth = c.field("max_depth")?;
            let min_samples_leaf = c.field("min_samples_leaf")?;
            let bootstrap = c.field("bootstrap")?;
            let mf: String = c.field("max_features")?;
            let max_features =
                parse_max_features(&mf).ok_or_else(|| c.err(format!("max_features `{mf}`")))?;
            let params = RfParams {
                n_trees,
                max_depth,
                min_samples_leaf,
                bootstrap,
                max_features,
            };
            params.validate().map_err(|e| c.err(e))?;
            let count = c.field("trees")?;
            let trees = read_trees(c, count, n_features)?;
            Model::Rf(RfModel {
                params,
                seed,
                n_features,
                trees,
            })
        }
        "linear" => {
            let n_features: usize = c.field("n_features")?;
            let line = c.next()?;
            let mut it = line.split_whitespace();
            if it.next() != Some("coef") {
                return Err(c.err("expected `coef` line"));
            }
            let coefficients = it
                .map(|v| c.num(Some(v), "coefficient"))
                .collect::<AppResult<Vec<f64>>>()?;
            if coefficients.len() != n_features {
                return Err(c.err(format!(
                    "{} coefficients for {n_features} features",
                    coefficients.len()
                )));
            }
            let line = c.next()?;
            let mut it = line.split_whitespace();
            if it.next() != Some("bias") {
                return Err(c.err("expected `bias` line"));
            }
            let bias = c.num(it.next(), "bias")?;
            Model::Linear(LinearModel { coefficients, bias })
        }
        other => return Err(c.err(format!("unknown model kind `{other}`"))),
    };
    if c.next()? != "end-model" {
        return Err(c.err("expected `end-model`"));
    }
    Ok(model)
}

fn ensure_end(c: &Cursor) -> AppResult<()> {
    match c.peek() {
        None => Ok(()),
        Some(_) => Err(AppError::parse(
            c.path,
            c.lines[c.at].0,
            "trailing content after bundle",
        )),
    }
}

pub fn parse_model(path: &Path, text: &str) -> AppResult<Model> {
    let mut c = Cursor::new(path, text);
    let m = read_model(&mut c)?;
    ensure_end(&c)?;
    Ok(m)
}

fn parse_product_list(c: &Cursor, s: &str) -> AppResult<ProductSet> {
    s.split(',')
        .map(|p| p.parse::<Product>().map_err(|e| c.err(e)))
        .collect::<AppResult<ProductSet>>()
}

pub fn parse_fusion(path: &Path, text: &str) -> AppResult<DecisionFusionModel> {
    let mut c = Cursor::new(path, text);
    c.expect_magic(FUSION_MAGIC)?;
    let id: u8 = c.field("scenario")?;
    let list: String = c.field("products")?;
    let products = parse_product_list(&c, &list)?;
    let scenario = FusionScenario { id, products };
    let mut base = BTreeMap::new();
    while let Some(line) = c.peek().filter(|l| l.starts_with("base ")) {
        c.next()?;
        let p: Product = line[5..].parse().map_err(|e| c.err(e))?;
        let m = read_model(&mut c)?;
        base.insert(p, m);
    }
    if base.keys().copied().collect::<ProductSet>() != products {
        return Err(c.err("base models do not match the scenario products"));
    }
    let mut combiners = BTreeMap::new();
    while let Some(line) = c.peek().filter(|l| l.starts_with("combiner ")) {
        c.next()?;
        let mut it = line.split_whitespace().skip(1);
        let set = parse_product_list(&c, it.next().unwrap_or(""))?;
        if it.next() != Some("bias") {
            return Err(c.err("expected `bias`"));
        }
        let bias = c.num(it.next(), "bias")?;
        if it.next() != Some("coef") {
            return Err(c.err("expected `coef`"));
        }
        let coefficients = it
            .map(|v| c.num(Some(v), "coefficient"))
            .collect::<AppResult<Vec<f64>>>()?;
        if coefficients.len() != set.len() || !set.is_subset_of(products) {
            return Err(c.err(format!("combiner for {set} is malformed")));
        }
        combiners.insert(
            set,
            Combiner {
                products: set,
                coefficients,
                bias,
            },
        );
    }
    if !combiners.contains_key(&products) {
        return Err(c.err("missing combiner for the full product set"));
    }
    let rows: usize = c.field("stacking_rows")?;
    let n = products.len();
    let mut stacking = StackingSet {
        keys: Vec::with_capacity(rows),
        decisions: Vec::with_capacity(rows * n),
        targets: Vec::with_capacity(rows),
    };
    for _ in 0..rows {
        let line = c.next()?;
        let mut it = line.split_whitespace();
        if it.next() != Some("row") {
            return Err(c.err("expected `row`"));
        }
        let id = it.next().ok_or_else(|| c.err("missing station id"))?;
        let date: Date = c.num(it.next(), "date")?;
        stacking.keys.push(SampleKey::new(id, date));
        stacking.targets.push(c.num(it.next(), "target")?);
        for _ in 0..n {
            stacking.decisions.push(c.num(it.next(), "decision")?);
        }
        if it.next().is_some() {
            return Err(c.err("too many decisions in stacking row"));
        }
    }
    if c.next()? != "end-fusion" {
        return Err(c.err("expected `end-fusion`"));
    }
    ensure_end(&c)?;
    Ok(DecisionFusionModel {
        scenario,
        base,
        combiners,
        stacking,
    })
}
