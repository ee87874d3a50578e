use rand::Rng;
use serde::{Deserialize, Serialize};

use super::split::{scan_sorted, BestSplit, Cell, ConstraintFlags, NodeStats, SplitCandidate};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::signed::{Path, PathStep, Sign};

/// A tree node. Internal nodes carry a split and two children; leaves carry
/// neither.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub split: Option<SplitCandidate>,
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub parent: Option<usize>,
    pub depth: usize,
    pub n_samples: usize,
    pub mean_label: f64,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

/// Binary regression tree stored as a node array; the root is node 0 and
/// nodes are numbered in left-first preorder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

/// Growth parameters for a single tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub mtry: usize,
    /// Nodes with fewer samples than this become leaves. Values of 2 or
    /// less leave only the pure/singleton stopping rule.
    pub min_node_size: usize,
    pub constraints: ConstraintFlags,
}

impl TreeParams {
    pub fn new(mtry: usize) -> Self {
        TreeParams {
            mtry,
            min_node_size: 1,
            constraints: ConstraintFlags::default(),
        }
    }

    pub(crate) fn validate(&self, p: usize) -> Result<()> {
        if self.mtry < 1 || self.mtry > p {
            return Err(Error::InvalidParameter(format!(
                "mtry must lie in [1, {p}], got {}",
                self.mtry
            )));
        }
        if !self.constraints.no_resampling {
            return Err(Error::InvalidParameter(
                "bootstrapping and subsampling are not supported; no_resampling must be true".into(),
            ));
        }
        let c = self.constraints.c_gamma;
        if self.constraints.balanced_split && !(c > 0.0 && c < 0.5) {
            return Err(Error::InvalidParameter(format!("c_gamma must lie in (0, 0.5), got {c}")));
        }
        Ok(())
    }
}

/// `ceil(p / 2)`.
pub fn default_mtry(p: usize) -> usize {
    p.div_ceil(2).max(1)
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// `sum over leaves of 2^-depth`; exactly 1 for a full binary tree.
    pub fn kraft_sum(&self) -> f64 {
        self.leaves().map(|l| (0.5f64).powi(l.depth as i32)).sum()
    }

    /// Index of the leaf `x` falls into (`x[k] <= threshold` goes left).
    pub fn leaf_for_point(&self, x: &[f64]) -> usize {
        let mut id = 0;
        while let (Some(split), Some(l), Some(r)) = (self.nodes[id].split, self.nodes[id].left, self.nodes[id].right) {
            id = if x[split.feature] <= split.threshold { l } else { r };
        }
        id
    }

    /// The unique root-to-leaf path containing `x`.
    pub fn path_for_point(&self, x: &[f64]) -> Path {
        let mut steps = Vec::new();
        let mut id = 0;
        while let (Some(split), Some(l), Some(r)) = (self.nodes[id].split, self.nodes[id].left, self.nodes[id].right) {
            let go_left = x[split.feature] <= split.threshold;
            steps.push(PathStep {
                node: id,
                feature: split.feature,
                sign: if go_left { Sign::Negative } else { Sign::Positive },
                impurity_decrease: split.impurity_decrease,
                depth: self.nodes[id].depth,
            });
            id = if go_left { l } else { r };
        }
        Path { steps, leaf: id }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.nodes[self.leaf_for_point(x)].mean_label
    }

    /// Checks the structural invariants a deserialized tree must satisfy.
    pub(crate) fn validate(&self, p: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(format!("malformed tree: {msg}")));
        if self.nodes.is_empty() {
            return bad("no nodes".into());
        }
        for (id, node) in self.nodes.iter().enumerate() {
            match (node.split, node.left, node.right) {
                (Some(split), Some(l), Some(r)) => {
                    if split.feature >= p {
                        return bad(format!("node {id} splits feature {} of {p}", split.feature));
                    }
                    for child in [l, r] {
                        let ok = child > id
                            && self
                                .nodes
                                .get(child)
                                .is_some_and(|c| c.parent == Some(id) && c.depth == node.depth + 1);
                        if !ok {
                            return bad(format!("node {id} has inconsistent child {child}"));
                        }
                    }
                }
                (None, None, None) => {}
                _ => return bad(format!("node {id} is neither leaf nor full internal node")),
            }
        }
        Ok(())
    }
}

/// Per-feature sample orders sorted by value, shared by every tree grown on
/// the same data.
#[derive(Debug, Clone)]
pub(crate) struct Presorted {
    orders: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(data: &Dataset) -> Self {
        let n = data.n_samples();
        let orders = (0..data.n_features())
            .map(|k| {
                let col = data.column(k);
                let mut order: Vec<u32> = (0..n as u32).collect();
                order.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                order
            })
            .collect();
        Presorted { orders }
    }
}

/// Grows one CART tree on the full dataset, drawing `mtry` candidate
/// features without replacement at every node.
pub fn fit_tree<R: Rng + ?Sized>(data: &Dataset, params: &TreeParams, rng: &mut R) -> Result<Tree> {
    params.validate(data.n_features())?;
    Ok(grow(data, &Presorted::new(data), params, rng))
}

struct Pending {
    node: usize,
    start: usize,
    end: usize,
    cell: Option<Cell>,
}

/// Every node's samples occupy the same contiguous segment of each
/// feature's order array, so a split only has to stably partition those
/// segments and no node ever re-sorts.
pub(crate) fn grow<R: Rng + ?Sized>(data: &Dataset, presorted: &Presorted, params: &TreeParams, rng: &mut R) -> Tree {
    let n = data.n_samples();
    let p = data.n_features();
    let labels = data.labels();
    let min_ratio = params.constraints.min_volume_ratio();
    let mut orders = presorted.orders.clone();
    let mut goes_left = vec![false; n];
    let mut scratch: Vec<u32> = Vec::with_capacity(n);

    let mut nodes = vec![Node {
        split: None,
        left: None,
        right: None,
        parent: None,
        depth: 0,
        n_samples: n,
        mean_label: 0.0,
    }];
    let mut stack = vec![Pending {
        node: 0,
        start: 0,
        end: n,
        cell: min_ratio.map(|_| Cell::unit(p)),
    }];

    while let Some(Pending { node, start, end, cell }) = stack.pop() {
        let count = end - start;
        let stats = NodeStats::new(orders[0][start..end].iter().map(|&i| labels[i as usize]));
        nodes[node].mean_label = stats.mean;
        if count < 2 || count < params.min_node_size || stats.constant {
            continue;
        }

        let mut features = rand::seq::index::sample(rng, p, params.mtry).into_vec();
        features.sort_unstable();
        let mut best = BestSplit::default();
        let balance = cell.as_ref().zip(min_ratio);
        for &k in &features {
            scan_sorted(k, &orders[k][start..end], data.column(k), labels, &stats, balance, &mut best);
        }
        let n_left = best.n_left;
        let Some(split) = best.into_candidate(n) else {
            continue;
        };

        for &i in &orders[split.feature][start..start + n_left] {
            goes_left[i as usize] = true;
        }
        for order in orders.iter_mut() {
            let seg = &mut order[start..end];
            scratch.clear();
            let mut w = 0;
            for r in 0..seg.len() {
                let i = seg[r];
                if goes_left[i as usize] {
                    seg[w] = i;
                    w += 1;
                } else {
                    scratch.push(i);
                }
            }
            debug_assert_eq!(w, n_left);
            seg[w..].copy_from_slice(&scratch);
        }
        for &i in &orders[split.feature][start..start + n_left] {
            goes_left[i as usize] = false;
        }

        let depth = nodes[node].depth + 1;
        let left = nodes.len();
        let right = left + 1;
        for n_samples in [n_left, count - n_left] {
            nodes.push(Node {
                split: None,
                left: None,
                right: None,
                parent: Some(node),
                depth,
                n_samples,
                mean_label: 0.0,
            });
        }
        nodes[node].split = Some(split);
        nodes[node].left = Some(left);
        nodes[node].right = Some(right);

        let (left_cell, right_cell) = match &cell {
            Some(c) => {
                let (l, r) = c.split(split.feature, split.threshold);
                (Some(l), Some(r))
            }
            None => (None, None),
        };
        let mid = start + n_left;
        stack.push(Pending {
            node: right,
            start: mid,
            end,
            cell: right_cell,
        });
        stack.push(Pending {
            node: left,
            start,
            end: mid,
            cell: left_cell,
        });
    }

    renumber_preorder(nodes)
}

/// Children are allocated in pairs as nodes are split, which interleaves
/// subtrees; rewrite ids into left-first preorder.
fn renumber_preorder(nodes: Vec<Node>) -> Tree {
    let mut new_id = vec![usize::MAX; nodes.len()];
    let mut order = Vec::with_capacity(nodes.len());
    let mut stack = vec![0usize];
    while let Some(id) = stack.pop() {
        new_id[id] = order.len();
        order.push(id);
        if let (Some(l), Some(r)) = (nodes[id].left, nodes[id].right) {
            stack.push(r);
            stack.push(l);
        }
    }
    let remapped = order
        .iter()
        .map(|&old| {
            let node = &nodes[old];
            Node {
                left: node.left.map(|c| new_id[c]),
                right: node.right.map(|c| new_id[c]),
                parent: node.parent.map(|c| new_id[c]),
                ..node.clone()
            }
        })
        .collect();
    Tree { nodes: remapped }
}
