//! Depth-weighted prevalence (DWP) and path prevalence (PP) of signed
//! interactions over a forest.
//!
//! Both tables are exact. An interaction that never occurs inside some
//! path's signed set has prevalence zero, so it suffices to accumulate
//! over the subsets (up to `s_max` members) of the signed sets that do
//! occur; the full candidate lattice is never enumerated.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rf::{Forest, Tree};
use crate::signed::{for_each_subset, kraft_weight, Sign, SignedFeature, SignedInteraction, SignedSetBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrevalenceKind {
    Dwp,
    Pp,
}

impl PrevalenceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PrevalenceKind::Dwp => "dwp",
            PrevalenceKind::Pp => "pp",
        }
    }
}

/// Prevalence values keyed by signed interaction. Absent keys have value 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceTable {
    entries: BTreeMap<SignedInteraction, f64>,
    pub kind: PrevalenceKind,
    pub epsilon: f64,
    pub s_max: usize,
    pub n_trees: usize,
}

impl PrevalenceTable {
    fn new(kind: PrevalenceKind, epsilon: f64, s_max: usize, n_trees: usize) -> Self {
        PrevalenceTable {
            entries: BTreeMap::new(),
            kind,
            epsilon,
            s_max,
            n_trees,
        }
    }

    /// Stored value; 0 for absent interactions and 1 for the empty one,
    /// which every signed set contains.
    pub fn lookup(&self, interaction: &SignedInteraction) -> f64 {
        if interaction.is_empty() {
            return 1.0;
        }
        self.entries.get(interaction).copied().unwrap_or(0.0)
    }

    pub fn lookup_feature(&self, feature: SignedFeature) -> f64 {
        self.entries.get(&[feature][..]).copied().unwrap_or(0.0)
    }

    /// `2^|S| * value`.
    pub fn scaled(&self, interaction: &SignedInteraction) -> f64 {
        interaction.size_scale() * self.lookup(interaction)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SignedInteraction, f64)> {
        self.entries.iter().map(|(k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds every subset of `members` (up to `s_max` members) with `weight`.
    fn add_subsets(&mut self, members: &[SignedFeature], weight: f64) {
        let entries = &mut self.entries;
        for_each_subset(members, self.s_max, |subset| {
            if let Some(v) = entries.get_mut(subset) {
                *v += weight;
            } else {
                entries.insert(SignedInteraction::from_sorted_unchecked(subset.to_vec()), weight);
            }
        });
    }

    fn scale_all(&mut self, factor: f64) {
        for v in self.entries.values_mut() {
            *v *= factor;
        }
    }

    /// CSV export with columns `interaction,size,value,scaled_value,kind`.
    /// `scaled_value` is `2^|S| * value` for DWP tables and the raw value
    /// for PP tables.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["interaction", "size", "value", "scaled_value", "kind"])?;
        for (s, v) in self.iter() {
            let scaled = match self.kind {
                PrevalenceKind::Dwp => s.size_scale() * v,
                PrevalenceKind::Pp => v,
            };
            wtr.write_record([
                s.to_string(),
                s.len().to_string(),
                v.to_string(),
                scaled.to_string(),
                self.kind.as_str().to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn check_params(epsilon: f64, s_max: usize) -> Result<()> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!("epsilon must be finite and >= 0, got {epsilon}")));
    }
    if s_max < 1 {
        return Err(Error::InvalidParameter("s_max must be at least 1".into()));
    }
    Ok(())
}

/// Largest impurity decrease among the internal nodes of each subtree
/// (negative infinity for leaves).
fn subtree_max_decrease(tree: &Tree) -> Vec<f64> {
    let nodes = tree.nodes();
    let mut best = vec![f64::NEG_INFINITY; nodes.len()];
    // children always come after their parent in the node array
    for id in (0..nodes.len()).rev() {
        let node = &nodes[id];
        if let (Some(split), Some(l), Some(r)) = (node.split, node.left, node.right) {
            best[id] = split.impurity_decrease.max(best[l]).max(best[r]);
        }
    }
    best
}

enum Step {
    Visit(usize),
    Insert(SignedFeature),
    Remove(usize),
}

/// Distribution of the signed set over the paths of one tree: each
/// distinct set with the total `2^-depth` weight of the paths producing it.
/// Weights sum to 1.
///
/// Below a node whose subtree holds no split of decrease `>= epsilon`
/// every path has the same signed set, and the Kraft weights of those
/// paths sum to `2^-depth(node)`, so such subtrees are not walked.
pub fn path_set_weights(tree: &Tree, epsilon: f64) -> BTreeMap<SignedInteraction, f64> {
    let max_below = subtree_max_decrease(tree);
    let mut sets: BTreeMap<SignedInteraction, f64> = BTreeMap::new();
    let mut current = SignedSetBuilder::default();
    let mut stack = vec![Step::Visit(0)];
    while let Some(step) = stack.pop() {
        match step {
            Step::Insert(sf) => {
                current.insert_first(sf);
            }
            Step::Remove(feature) => current.remove_feature(feature),
            Step::Visit(id) => {
                let node = tree.node(id);
                let (Some(split), Some(l), Some(r)) = (node.split, node.left, node.right) else {
                    add_weight(&mut sets, current.members(), kraft_weight(node.depth));
                    continue;
                };
                if max_below[id] < epsilon {
                    add_weight(&mut sets, current.members(), kraft_weight(node.depth));
                    continue;
                }
                let fresh = split.impurity_decrease >= epsilon
                    && !current.members().iter().any(|m| m.feature == split.feature);
                if fresh {
                    stack.push(Step::Remove(split.feature));
                    stack.push(Step::Visit(r));
                    stack.push(Step::Insert(SignedFeature::new(split.feature, Sign::Positive)));
                    stack.push(Step::Remove(split.feature));
                    stack.push(Step::Visit(l));
                    stack.push(Step::Insert(SignedFeature::new(split.feature, Sign::Negative)));
                } else {
                    stack.push(Step::Visit(r));
                    stack.push(Step::Visit(l));
                }
            }
        }
    }
    sets
}

fn add_weight(sets: &mut BTreeMap<SignedInteraction, f64>, members: &[SignedFeature], weight: f64) {
    if let Some(v) = sets.get_mut(members) {
        *v += weight;
    } else {
        sets.insert(SignedInteraction::from_sorted_unchecked(members.to_vec()), weight);
    }
}

/// Exact depth-weighted prevalence: for every interaction `S` with at most
/// `s_max` members, the probability that `S` lies in the signed set of a
/// path drawn by picking a tree uniformly and then a path with probability
/// `2^-depth`.
///
/// Trees are processed in parallel and their tables merged in tree order,
/// so results do not depend on the thread count.
pub fn compute_dwp(forest: &Forest, epsilon: f64, s_max: usize) -> Result<PrevalenceTable> {
    check_params(epsilon, s_max)?;
    let per_tree: Vec<PrevalenceTable> = forest
        .trees
        .par_iter()
        .map(|tree| {
            let mut table = PrevalenceTable::new(PrevalenceKind::Dwp, epsilon, s_max, 1);
            for (set, w) in path_set_weights(tree, epsilon) {
                table.add_subsets(set.members(), w);
            }
            table
        })
        .collect();
    let mut total = PrevalenceTable::new(PrevalenceKind::Dwp, epsilon, s_max, forest.n_trees());
    for table in per_tree {
        for (s, v) in table.entries {
            *total.entries.entry(s).or_insert(0.0) += v;
        }
    }
    total.scale_all(1.0 / forest.n_trees() as f64);
    Ok(total)
}

/// Exact path prevalence at `x`: the fraction of trees whose path through
/// `x` has a signed set containing the interaction.
pub fn compute_pp(forest: &Forest, x: &[f64], epsilon: f64, s_max: usize) -> Result<PrevalenceTable> {
    check_params(epsilon, s_max)?;
    forest.check_dimension(x)?;
    let mut table = PrevalenceTable::new(PrevalenceKind::Pp, epsilon, s_max, forest.n_trees());
    for tree in &forest.trees {
        let set = crate::signed::extract_signed_set(&tree.path_for_point(x), epsilon);
        table.add_subsets(set.members(), 1.0);
    }
    table.scale_all(1.0 / forest.n_trees() as f64);
    Ok(table)
}

/// Monte-Carlo estimate of the DWP table from `n_walks` random walks, each
/// picking a tree uniformly and descending left or right with probability
/// one half. Unbiased for every entry.
pub fn monte_carlo_dwp<R: Rng + ?Sized>(
    forest: &Forest,
    epsilon: f64,
    s_max: usize,
    n_walks: usize,
    rng: &mut R,
) -> Result<PrevalenceTable> {
    check_params(epsilon, s_max)?;
    if n_walks < 1 {
        return Err(Error::InvalidParameter("n_walks must be at least 1".into()));
    }
    let mut table = PrevalenceTable::new(PrevalenceKind::Dwp, epsilon, s_max, forest.n_trees());
    for _ in 0..n_walks {
        let tree = &forest.trees[rng.random_range(0..forest.n_trees())];
        let mut set = SignedSetBuilder::default();
        let mut id = 0;
        while let (Some(split), Some(l), Some(r)) = (tree.node(id).split, tree.node(id).left, tree.node(id).right) {
            let left = rng.random_bool(0.5);
            if split.impurity_decrease >= epsilon {
                let sign = if left { Sign::Negative } else { Sign::Positive };
                set.insert_first(SignedFeature::new(split.feature, sign));
            }
            id = if left { l } else { r };
        }
        table.add_subsets(set.members(), 1.0);
    }
    table.scale_all(1.0 / n_walks as f64);
    Ok(table)
}
