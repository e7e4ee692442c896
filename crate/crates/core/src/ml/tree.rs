//! Least-squares regression trees grown level by level.
//!
//! Each level makes one pass per feature over presorted rows, so split search
//! cost is `O(features × rows)` per level regardless of how many nodes are
//! open. Rows carry integer multiplicities (0 = out of sample), which covers
//! subsampling and bootstrap draws without copying data.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features considered per node; `None` means all.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Nodes stored in preorder; the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    /// Rebuilds a tree from a preorder node list, checking its structure.
    pub fn from_nodes(nodes: Vec<Node>, n_features: usize) -> Result<Self> {
        fn walk(
            nodes: &[Node],
            at: usize,
            n_features: usize,
        ) -> core::result::Result<usize, &'static str> {
            match nodes.get(at) {
                None => Err("child index out of range"),
                Some(Node::Leaf { value }) => {
                    if value.is_finite() {
                        Ok(at + 1)
                    } else {
                        Err("non-finite leaf value")
                    }
                }
                Some(Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                }) => {
                    if *feature >= n_features || !threshold.is_finite() {
                        return Err("bad split");
                    }
                    if *left != at + 1 {
                        return Err("nodes are not in preorder");
                    }
                    let next = walk(nodes, *left, n_features)?;
                    if *right != next {
                        return Err("nodes are not in preorder");
                    }
                    walk(nodes, *right, n_features)
                }
            }
        }
        match walk(&nodes, 0, n_features) {
            Ok(end) if end == nodes.len() => Ok(RegressionTree { nodes }),
            Ok(_) => Err(Error::validation("tree", "unreachable nodes")),
            Err(reason) => Err(Error::validation("tree", reason)),
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

/// Row indices per feature, sorted by (value, row), plus the values in that
/// order for sequential access.
pub(crate) struct Presorted {
    order: Vec<Vec<u32>>,
    values: Vec<Vec<f64>>,
}

impl Presorted {
    pub(crate) fn new(x: &[f64], n_rows: usize, n_features: usize) -> Self {
        let mut order = Vec::with_capacity(n_features);
        let mut values = Vec::with_capacity(n_features);
        for f in 0..n_features {
            let mut idx: Vec<u32> = (0..n_rows as u32).collect();
            idx.sort_by(|&a, &b| {
                x[a as usize * n_features + f]
                    .total_cmp(&x[b as usize * n_features + f])
                    .then(a.cmp(&b))
            });
            values.push(
                idx.iter()
                    .map(|&r| x[r as usize * n_features + f])
                    .collect(),
            );
            order.push(idx);
        }
        Presorted { order, values }
    }
}

/// Split threshold between two adjacent distinct values.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

const NONE: u32 = u32::MAX;

struct Building {
    depth: usize,
    weight: f64,
    sum: f64,
    split: Option<(usize, f64, usize, usize)>,
    mask: Option<Vec<bool>>,
}

/// Running split search state for one open node.
struct Scan {
    weight: i64,
    sum: f64,
    parent: f64,
    left_w: i64,
    left_s: f64,
    last: f64,
    best_gain: f64,
    best_feature: usize,
    best_threshold: f64,
}

impl Scan {
    fn new(weight: i64, sum: f64, parent: f64) -> Self {
        Scan {
            weight,
            sum,
            parent,
            left_w: 0,
            left_s: 0.0,
            last: f64::NEG_INFINITY,
            best_gain: 0.0,
            best_feature: usize::MAX,
            best_threshold: 0.0,
        }
    }

    fn best(&self) -> Option<(usize, f64)> {
        (self.best_feature != usize::MAX).then_some((self.best_feature, self.best_threshold))
    }
}

/// Grows one tree on `targets` with per-row multiplicities `counts`.
pub(crate) fn grow(
    x: &[f64],
    n_features: usize,
    targets: &[f64],
    counts: &[u32],
    sorted: &Presorted,
    params: &TreeParams,
    mut rng: Option<&mut Rng>,
) -> RegressionTree {
    let n = targets.len();
    let min_leaf = params.min_samples_leaf.max(1) as f64;
    let mut node_of = vec![NONE; n];
    let mut root = Building {
        depth: 0,
        weight: 0.0,
        sum: 0.0,
        split: None,
        mask: None,
    };
    for r in 0..n {
        if counts[r] > 0 {
            node_of[r] = 0;
            let c = counts[r] as f64;
            root.weight += c;
            root.sum += c * targets[r];
        }
    }
    let row_s: Vec<f64> = (0..n).map(|r| counts[r] as f64 * targets[r]).collect();
    // Weights are integer multiplicities, so `inv[w] = 1 / w` replaces divisions.
    let min_count = params.min_samples_leaf.max(1) as i64;
    let total: u32 = counts.iter().sum();
    let inv: Vec<f64> = (0..=total)
        .map(|w| if w == 0 { 0.0 } else { 1.0 / w as f64 })
        .collect();
    let mut arena = vec![root];
    let mut frontier = vec![0usize];
    let mut slot_of: Vec<u32> = vec![NONE];
    // Per-feature sorted rows still worth scanning; compacted as nodes close.
    let mut work: Vec<(Vec<u32>, Vec<f64>)> = (0..n_features)
        .map(|f| {
            sorted.order[f]
                .iter()
                .zip(&sorted.values[f])
                .filter(|(&r, _)| counts[r as usize] > 0)
                .map(|(&r, &v)| (r, v))
                .unzip()
        })
        .collect();

    while !frontier.is_empty() {
        let mut active = Vec::new();
        for &id in &frontier {
            let b = &arena[id];
            if b.depth < params.max_depth && b.weight >= 2.0 * min_leaf {
                slot_of[id] = active.len() as u32;
                active.push(id);
            }
        }
        if active.is_empty() {
            break;
        }
        if let (Some(k), Some(rng)) = (params.max_features, rng.as_deref_mut()) {
            if k < n_features {
                for &id in &active {
                    let mut mask = vec![false; n_features];
                    for f in rng.sample_indices(n_features, k) {
                        mask[f] = true;
                    }
                    arena[id].mask = Some(mask);
                }
            }
        }

        // Flat per-row view of this level: open slot, multiplicity, weighted
        // target. Rows outside open nodes go to a trailing scratch slot so the
        // scan needs no branch for them.
        let scratch = active.len() as u32;
        let mut rows: Vec<(u32, i64, f64)> = (0..n)
            .map(|r| (scratch, counts[r] as i64, row_s[r]))
            .collect();
        let mut live = 0;
        for r in 0..n {
            let node = node_of[r];
            if node != NONE && slot_of[node as usize] != NONE {
                rows[r].0 = slot_of[node as usize];
                live += 1;
            }
        }
        if 4 * live < 3 * work[0].0.len() {
            for (ord, vals) in work.iter_mut() {
                let mut keep = 0;
                for i in 0..ord.len() {
                    if rows[ord[i] as usize].0 != scratch {
                        ord[keep] = ord[i];
                        vals[keep] = vals[i];
                        keep += 1;
                    }
                }
                ord.truncate(keep);
                vals.truncate(keep);
            }
        }
        let mut scans: Vec<Scan> = active
            .iter()
            .map(|&id| {
                let (w, sum) = (arena[id].weight, arena[id].sum);
                Scan::new(w as i64, sum, sum * sum * inv[w as usize])
            })
            .collect();
        // Zero total weight keeps the right side below `min_leaf`, so the scratch slot never splits.
        scans.push(Scan::new(0, 0.0, 0.0));
        for f in 0..n_features {
            let mut used: Vec<bool> = active
                .iter()
                .map(|&id| arena[id].mask.as_ref().is_none_or(|m| m[f]))
                .collect();
            if !used.iter().any(|&u| u) {
                continue;
            }
            used.push(true);
            for s in scans.iter_mut() {
                s.left_w = 0;
                s.left_s = 0.0;
                s.last = f64::NEG_INFINITY;
            }
            let all_used = used.iter().all(|&u| u);
            for (&r, &v) in work[f].0.iter().zip(&work[f].1) {
                let (slot, rw, rs) = rows[r as usize];
                if !all_used && !used[slot as usize] {
                    continue;
                }
                let s = &mut scans[slot as usize];
                // `last` starts at -inf with zero left weight, so the first row never splits.
                if v > s.last && s.left_w >= min_count {
                    let right_w = s.weight - s.left_w;
                    if right_w >= min_count {
                        let right_s = s.sum - s.left_s;
                        let gain = s.left_s * s.left_s * inv[s.left_w as usize]
                            + right_s * right_s * inv[right_w as usize]
                            - s.parent;
                        if gain > s.best_gain {
                            s.best_gain = gain;
                            s.best_feature = f;
                            s.best_threshold = midpoint(s.last, v);
                        }
                    }
                }
                s.left_w += rw;
                s.left_s += rs;
                s.last = v;
            }
        }

        let mut next = Vec::new();
        for (slot, &id) in active.iter().enumerate() {
            if let Some((f, thr)) = scans[slot].best() {
                let depth = arena[id].depth + 1;
                let left = arena.len();
                for _ in 0..2 {
                    arena.push(Building {
                        depth,
                        weight: 0.0,
                        sum: 0.0,
                        split: None,
                        mask: None,
                    });
                    slot_of.push(NONE);
                }
                arena[id].split = Some((f, thr, left, left + 1));
                next.push(left);
                next.push(left + 1);
            }
        }
        for r in 0..n {
            let node = node_of[r];
            if node == NONE {
                continue;
            }
            if let Some((f, thr, left, right)) = arena[node as usize].split {
                let child = if x[r * n_features + f] <= thr {
                    left
                } else {
                    right
                };
                node_of[r] = child as u32;
                let c = counts[r] as f64;
                arena[child].weight += c;
                arena[child].sum += c * targets[r];
            }
        }
        for &id in &active {
            slot_of[id] = NONE;
        }
        frontier = next;
    }

    let mut nodes = Vec::with_capacity(arena.len());
    fn emit(arena: &[Building], id: usize, out: &mut Vec<Node>) {
        match arena[id].split {
            None => {
                let b = &arena[id];
                let value = if b.weight > 0.0 {
                    b.sum / b.weight
                } else {
                    0.0
                };
                out.push(Node::Leaf { value });
            }
            Some((feature, threshold, l, r)) => {
                let at = out.len();
                out.push(Node::Split {
                    feature,
                    threshold,
                    left: at + 1,
                    right: 0,
                });
                emit(arena, l, out);
                let right_at = out.len();
                if let Node::Split { right, .. } = &mut out[at] {
                    *right = right_at;
                }
                emit(arena, r, out);
            }
        }
    }
    emit(&arena, 0, &mut nodes);
    RegressionTree { nodes }
}

/// Fits a single tree on all rows with unit weights.
pub fn fit_tree(
    x: &[f64],
    n_features: usize,
    y: &[f64],
    params: &TreeParams,
) -> Result<RegressionTree> {
    if y.is_empty() || x.len() != y.len() * n_features {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len() * n_features,
        });
    }
    let sorted = Presorted::new(x, y.len(), n_features);
    let counts = vec![1u32; y.len()];
    Ok(grow(x, n_features, y, &counts, &sorted, params, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(depth: usize, leaf: usize) -> TreeParams {
        TreeParams {
            max_depth: depth,
            min_samples_leaf: leaf,
            max_features: None,
        }
    }

    #[test]
    fn stump_on_two_points() {
        let t = fit_tree(&[0.0, 1.0], 1, &[0.0, 10.0], &params(1, 1)).unwrap();
        assert_eq!(
            t.nodes(),
            &[
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2
                },
                Node::Leaf { value: 0.0 },
                Node::Leaf { value: 10.0 },
            ]
        );
    }

    #[test]
    fn depth_and_leaf_limits_hold() {
        let mut rng = Rng::new(4);
        let n = 300;
        let x: Vec<f64> = (0..n * 3).map(|_| rng.uniform()).collect();
        let y: Vec<f64> = (0..n).map(|i| x[i * 3] * 10.0 + rng.normal()).collect();
        let t = fit_tree(&x, 3, &y, &params(4, 7)).unwrap();
        assert!(t.depth() <= 4);
        let mut per_leaf = alloc::collections::BTreeMap::new();
        for i in 0..n {
            let mut at = 0;
            while let Node::Split {
                feature,
                threshold,
                left,
                right,
            } = &t.nodes()[at]
            {
                at = if x[i * 3 + feature] <= *threshold {
                    *left
                } else {
                    *right
                };
            }
            *per_leaf.entry(at).or_insert(0) += 1;
        }
        assert!(per_leaf.values().all(|&c| c >= 7));
        assert_eq!(per_leaf.len(), t.n_leaves());
    }

    #[test]
    fn constant_targets_give_a_single_leaf() {
        let t = fit_tree(&[1.0, 2.0, 3.0, 4.0], 1, &[5.0; 4], &params(3, 1)).unwrap();
        assert_eq!(t.nodes(), &[Node::Leaf { value: 5.0 }]);
    }

    #[test]
    fn from_nodes_rejects_bad_structure() {
        let ok = fit_tree(&[0.0, 1.0], 1, &[0.0, 10.0], &params(1, 1)).unwrap();
        assert_eq!(
            RegressionTree::from_nodes(ok.nodes().to_vec(), 1).unwrap(),
            ok
        );
        assert!(RegressionTree::from_nodes(ok.nodes().to_vec(), 0).is_err());
        let mut bad = ok.nodes().to_vec();
        bad.push(Node::Leaf { value: 1.0 });
        assert!(RegressionTree::from_nodes(bad, 1).is_err());
        assert!(RegressionTree::from_nodes(Vec::new(), 1).is_err());
    }

    #[test]
    fn midpoint_never_reaches_upper_value() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        assert_eq!(midpoint(lo, hi), lo);
        assert_eq!(midpoint(1.0, 2.0), 1.5);
    }
}
