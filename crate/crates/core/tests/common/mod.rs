//! Independent reference implementations used by the integration tests.
//! Everything here is written from the definitions, deliberately naive,
//! and shares no code with the library beyond its public data types.
#![allow(dead_code)]

use std::collections::BTreeMap;

use lssfind::rf::Tree;
use lssfind::{Dataset, Forest, SignedFeature, SignedInteraction};
use rand::Rng;

/// Population variance by two passes.
pub fn variance(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n
}

/// Exhaustive split search. Returns `(feature, lo, hi, decrease)` where any
/// threshold in `[lo, hi)` realises the best split. Ties go to the lowest
/// feature, then the lowest threshold.
pub fn brute_best_split(data: &Dataset, samples: &[usize], features: &[usize]) -> Option<(usize, f64, f64, f64)> {
    let n = data.n_samples() as f64;
    let y: Vec<f64> = samples.iter().map(|&i| data.labels()[i]).collect();
    let parent = samples.len() as f64 / n * variance(&y);
    let mut feats = features.to_vec();
    feats.sort_unstable();
    let mut all = Vec::new();
    for &k in &feats {
        let col = data.column(k);
        let mut values: Vec<f64> = samples.iter().map(|&i| col[i]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let (l, r): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&i| col[i] <= w[0]);
            let yl: Vec<f64> = l.iter().map(|&i| data.labels()[i]).collect();
            let yr: Vec<f64> = r.iter().map(|&i| data.labels()[i]).collect();
            let dec = parent - yl.len() as f64 / n * variance(&yl) - yr.len() as f64 / n * variance(&yr);
            all.push((k, w[0], w[1], dec));
        }
    }
    let best = all.iter().map(|c| c.3).fold(f64::NEG_INFINITY, f64::max);
    if !(best > 1e-10 * parent.max(f64::MIN_POSITIVE)) {
        return None;
    }
    all.into_iter().find(|c| c.3 >= best - 1e-9 * best.abs())
}

/// Kraft sum by walking child links, ignoring the recorded depths.
pub fn kraft_by_walk(tree: &Tree) -> f64 {
    fn go(tree: &Tree, id: usize, w: f64) -> f64 {
        let node = tree.node(id);
        match (node.left, node.right) {
            (Some(l), Some(r)) => go(tree, l, w / 2.0) + go(tree, r, w / 2.0),
            _ => w,
        }
    }
    go(tree, 0, 1.0)
}

/// Signed features of one path: a feature enters with the sign of its
/// first node whose decrease reaches `eps`.
fn add_step(set: &mut BTreeMap<usize, i8>, feature: usize, sign: i8, decrease: f64, eps: f64) {
    if decrease >= eps {
        set.entry(feature).or_insert(sign);
    }
}

/// Every root-to-leaf path with its weight `2^-depth` and signed set.
pub fn path_sets(tree: &Tree, eps: f64) -> Vec<(f64, BTreeMap<usize, i8>)> {
    fn go(tree: &Tree, id: usize, w: f64, set: BTreeMap<usize, i8>, eps: f64, out: &mut Vec<(f64, BTreeMap<usize, i8>)>) {
        let node = tree.node(id);
        match (node.split, node.left, node.right) {
            (Some(s), Some(l), Some(r)) => {
                let mut left = set.clone();
                add_step(&mut left, s.feature, -1, s.impurity_decrease, eps);
                go(tree, l, w / 2.0, left, eps, out);
                let mut right = set;
                add_step(&mut right, s.feature, 1, s.impurity_decrease, eps);
                go(tree, r, w / 2.0, right, eps, out);
            }
            _ => out.push((w, set)),
        }
    }
    let mut out = Vec::new();
    go(tree, 0, 1.0, BTreeMap::new(), eps, &mut out);
    out
}

/// Signed set of the path `x` follows (`x_k <= threshold` goes left).
pub fn point_set(tree: &Tree, x: &[f64], eps: f64) -> BTreeMap<usize, i8> {
    let mut set = BTreeMap::new();
    let mut id = 0;
    loop {
        let node = tree.node(id);
        match (node.split, node.left, node.right) {
            (Some(s), Some(l), Some(r)) => {
                let goes_left = x[s.feature] <= s.threshold;
                add_step(&mut set, s.feature, if goes_left { -1 } else { 1 }, s.impurity_decrease, eps);
                id = if goes_left { l } else { r };
            }
            _ => return set,
        }
    }
}

pub fn as_pairs(s: &SignedInteraction) -> Vec<(usize, i8)> {
    s.members().iter().map(|m| (m.feature, m.sign.as_i8())).collect()
}

fn contains(set: &BTreeMap<usize, i8>, s: &[(usize, i8)]) -> bool {
    s.iter().all(|(k, b)| set.get(k) == Some(b))
}

pub fn brute_dwp(forest: &Forest, eps: f64, s: &SignedInteraction) -> f64 {
    let s = as_pairs(s);
    let total: f64 = forest
        .trees
        .iter()
        .map(|t| path_sets(t, eps).iter().filter(|(_, set)| contains(set, &s)).map(|(w, _)| w).sum::<f64>())
        .sum();
    total / forest.n_trees() as f64
}

pub fn brute_pp(forest: &Forest, x: &[f64], eps: f64, s: &SignedInteraction) -> f64 {
    let s = as_pairs(s);
    let hits = forest.trees.iter().filter(|t| contains(&point_set(t, x, eps), &s)).count();
    hits as f64 / forest.n_trees() as f64
}

/// Every signed interaction over `p` features with 1 to `s_max` members.
pub fn lattice(p: usize, s_max: usize) -> Vec<SignedInteraction> {
    let mut out = Vec::new();
    for code in 1..3usize.pow(p as u32) {
        let mut c = code;
        let mut members = Vec::new();
        for k in 0..p {
            match c % 3 {
                1 => members.push(SignedFeature::neg(k)),
                2 => members.push(SignedFeature::pos(k)),
                _ => {}
            }
            c /= 3;
        }
        if members.len() <= s_max {
            out.push(SignedInteraction::new(members).unwrap());
        }
    }
    out
}

/// A random full binary tree of depth at most `max_depth`, in the JSON
/// layout the library reads. Decreases straddle 0.01 so some splits fall
/// below typical thresholds, and features repeat along paths.
pub fn random_tree_json<R: Rng>(rng: &mut R, p: usize, max_depth: usize) -> serde_json::Value {
    fn build<R: Rng>(
        rng: &mut R,
        p: usize,
        max_depth: usize,
        parent: Option<usize>,
        depth: usize,
        nodes: &mut Vec<serde_json::Value>,
    ) -> (usize, usize) {
        let id = nodes.len();
        nodes.push(serde_json::Value::Null);
        let internal = depth < max_depth && rng.random_bool(if depth == 0 { 0.9 } else { 0.6 });
        if !internal {
            nodes[id] = serde_json::json!({
                "split": null, "left": null, "right": null, "parent": parent,
                "depth": depth, "n_samples": 1, "mean_label": 0.0
            });
            return (id, 1);
        }
        let decrease = [0.0, 0.005, 0.01, 0.02, 0.3][rng.random_range(0..5)] * rng.random_range(0.5..1.5);
        let split = serde_json::json!({
            "feature": rng.random_range(0..p),
            "threshold": rng.random::<f64>(),
            "impurity_decrease": decrease,
        });
        let (l, nl) = build(rng, p, max_depth, Some(id), depth + 1, nodes);
        let (r, nr) = build(rng, p, max_depth, Some(id), depth + 1, nodes);
        nodes[id] = serde_json::json!({
            "split": split, "left": l, "right": r, "parent": parent,
            "depth": depth, "n_samples": nl + nr, "mean_label": 0.0
        });
        (id, nl + nr)
    }
    let mut nodes = Vec::new();
    build(rng, p, max_depth, None, 0, &mut nodes);
    serde_json::json!({ "nodes": nodes })
}

/// A forest of random trees, loaded through the public JSON reader.
pub fn random_forest<R: Rng>(rng: &mut R, p: usize, n_trees: usize, max_depth: usize) -> Forest {
    let trees: Vec<_> = (0..n_trees).map(|_| random_tree_json(rng, p, max_depth)).collect();
    let doc = serde_json::json!({
        "format_version": lssfind::rf::FOREST_FORMAT_VERSION,
        "n_features": p,
        "n_samples": 1,
        "mtry": 1,
        "seed": 0,
        "min_node_size": 1,
        "constraint_flags": {},
        "feature_names": (1..=p).map(|k| format!("x{k}")).collect::<Vec<_>>(),
        "trees": trees,
    });
    Forest::read_json(serde_json::to_vec(&doc).unwrap().as_slice()).unwrap()
}

/// A dataset whose features take few distinct values, to exercise ties.
pub fn random_dataset<R: Rng>(rng: &mut R, n: usize, p: usize) -> Dataset {
    let levels = rng.random_range(2..8);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect())
        .collect();
    let y = (0..n).map(|_| rng.random_range(0..5) as f64 + 0.25 * rng.random::<f64>()).collect();
    Dataset::from_rows(&rows, y).unwrap()
}

/// Mann-Whitney AUC from the rank-sum formula with midranks; `scored`
/// holds `(is_truth, score)`. Returns `None` if either class is empty.
pub fn rank_sum_auc(scored: &[(bool, f64)]) -> Option<f64> {
    let n_pos = scored.iter().filter(|s| s.0).count();
    let n_neg = scored.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].1.total_cmp(&scored[b].1));
    let mut ranks = vec![0.0; scored.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scored[order[j + 1]].1 == scored[order[i]].1 {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = mid;
        }
        i = j + 1;
    }
    let r_pos: f64 = (0..scored.len()).filter(|&i| scored[i].0).map(|i| ranks[i]).sum();
    Some((r_pos - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos * n_neg) as f64)
}
