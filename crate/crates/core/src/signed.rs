//! Signed features, signed interactions and the root-to-leaf paths they are
//! read from.
//!
//! Feature indices are 0-based in memory. The text form (`3-,7+,12-`) is
//! 1-based.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rf::Tree;

/// Direction taken at a split: `Negative` is the `<=` branch, `Positive`
/// the `>` branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Negative,
    Positive,
}

impl Sign {
    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Negative => -1,
            Sign::Positive => 1,
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Negative => Sign::Positive,
            Sign::Positive => Sign::Negative,
        }
    }

    fn symbol(self) -> char {
        match self {
            Sign::Negative => '-',
            Sign::Positive => '+',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignedFeature {
    pub feature: usize,
    pub sign: Sign,
}

impl SignedFeature {
    pub fn new(feature: usize, sign: Sign) -> Self {
        SignedFeature { feature, sign }
    }

    pub fn neg(feature: usize) -> Self {
        Self::new(feature, Sign::Negative)
    }

    pub fn pos(feature: usize) -> Self {
        Self::new(feature, Sign::Positive)
    }
}

impl fmt::Display for SignedFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.feature + 1, self.sign.symbol())
    }
}

impl FromStr for SignedFeature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidParameter(format!("malformed signed feature '{s}'"));
        let (digits, sign) = match s.chars().last() {
            Some('-') => (&s[..s.len() - 1], Sign::Negative),
            Some('+') => (&s[..s.len() - 1], Sign::Positive),
            _ => return Err(bad()),
        };
        let one_based: usize = digits.parse().map_err(|_| bad())?;
        if one_based == 0 {
            return Err(bad());
        }
        Ok(SignedFeature::new(one_based - 1, sign))
    }
}

/// A set of signed features kept in canonical order (by feature, then sign),
/// so equality and ordering are structural.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SignedInteraction {
    members: Vec<SignedFeature>,
}

impl SignedInteraction {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Canonicalizes `members`. Fails if a feature appears with both signs.
    pub fn new(mut members: Vec<SignedFeature>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if members.windows(2).any(|w| w[0].feature == w[1].feature) {
            return Err(Error::InvalidParameter(
                "a feature appears with both signs".into(),
            ));
        }
        Ok(SignedInteraction { members })
    }

    /// Callers guarantee the members are sorted and feature-unique.
    pub(crate) fn from_sorted_unchecked(members: Vec<SignedFeature>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0].feature < w[1].feature));
        SignedInteraction { members }
    }

    pub fn singleton(feature: SignedFeature) -> Self {
        SignedInteraction {
            members: vec![feature],
        }
    }

    pub fn members(&self) -> &[SignedFeature] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, feature: &SignedFeature) -> bool {
        self.members.binary_search(feature).is_ok()
    }

    /// Subset test over two canonical member lists.
    pub fn is_subset_of(&self, other: &SignedInteraction) -> bool {
        let mut theirs = other.members.iter();
        'outer: for m in &self.members {
            for t in theirs.by_ref() {
                if t == m {
                    continue 'outer;
                }
                if t > m {
                    return false;
                }
            }
            return false;
        }
        true
    }

    pub fn is_proper_subset_of(&self, other: &SignedInteraction) -> bool {
        self.len() < other.len() && self.is_subset_of(other)
    }

    /// `2^|S|`, the factor that puts prevalences of different sizes on a
    /// common scale.
    pub fn size_scale(&self) -> f64 {
        (2.0f64).powi(self.len() as i32)
    }
}

impl fmt::Display for SignedInteraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.members.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

impl FromStr for SignedInteraction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self::empty());
        }
        let members = s
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<SignedFeature>>>()?;
        Self::new(members)
    }
}

impl std::borrow::Borrow<[SignedFeature]> for SignedInteraction {
    fn borrow(&self) -> &[SignedFeature] {
        &self.members
    }
}

impl Serialize for SignedInteraction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SignedInteraction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Serialize for SignedFeature {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SignedFeature {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One internal node along a path, with the direction the path took.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathStep {
    pub node: usize,
    pub feature: usize,
    pub sign: Sign,
    pub impurity_decrease: f64,
    pub depth: usize,
}

/// Root-to-leaf path: the internal nodes in order, then the leaf.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Path {
    pub steps: Vec<PathStep>,
    pub leaf: usize,
}

impl Path {
    pub fn depth(&self) -> usize {
        self.steps.len()
    }

    /// Kraft weight `2^-depth`.
    pub fn weight(&self) -> f64 {
        kraft_weight(self.depth())
    }
}

pub(crate) fn kraft_weight(depth: usize) -> f64 {
    (0.5f64).powi(depth as i32)
}

/// Signed features of the nodes on `path` whose impurity decrease is at
/// least `epsilon`, keeping only the first such node for each feature.
///
/// Nodes below `epsilon` are ignored entirely: a later qualifying node on a
/// feature still counts even if an earlier, weaker split used the same
/// feature.
pub fn extract_signed_set(path: &Path, epsilon: f64) -> SignedInteraction {
    let mut set = SignedSetBuilder::default();
    for step in &path.steps {
        if step.impurity_decrease >= epsilon {
            set.insert_first(SignedFeature::new(step.feature, step.sign));
        }
    }
    set.finish()
}

/// Incremental builder for first-occurrence signed sets.
#[derive(Debug, Clone, Default)]
pub(crate) struct SignedSetBuilder {
    members: Vec<SignedFeature>,
}

impl SignedSetBuilder {
    /// Adds `sf` unless its feature is already present. Returns whether it
    /// was added.
    pub fn insert_first(&mut self, sf: SignedFeature) -> bool {
        match self.members.binary_search_by_key(&sf.feature, |m| m.feature) {
            Ok(_) => false,
            Err(pos) => {
                self.members.insert(pos, sf);
                true
            }
        }
    }

    pub fn remove_feature(&mut self, feature: usize) {
        if let Ok(pos) = self.members.binary_search_by_key(&feature, |m| m.feature) {
            self.members.remove(pos);
        }
    }

    pub fn members(&self) -> &[SignedFeature] {
        &self.members
    }

    pub fn finish(self) -> SignedInteraction {
        SignedInteraction::from_sorted_unchecked(self.members)
    }
}

/// Every root-to-leaf path of `tree` with its weight `2^-depth`, in
/// left-first order.
pub fn enumerate_paths(tree: &Tree) -> Vec<(Path, f64)> {
    let mut out = Vec::new();
    let mut stack: Vec<(usize, Vec<PathStep>)> = vec![(0, Vec::new())];
    while let Some((id, steps)) = stack.pop() {
        let node = tree.node(id);
        match (node.split, node.left, node.right) {
            (Some(split), Some(l), Some(r)) => {
                let step = |sign| PathStep {
                    node: id,
                    feature: split.feature,
                    sign,
                    impurity_decrease: split.impurity_decrease,
                    depth: node.depth,
                };
                let mut right = steps.clone();
                right.push(step(Sign::Positive));
                let mut left = steps;
                left.push(step(Sign::Negative));
                stack.push((r, right));
                stack.push((l, left));
            }
            _ => {
                let path = Path { steps, leaf: id };
                let w = path.weight();
                out.push((path, w));
            }
        }
    }
    out
}

/// All nonempty subsets of `interaction` with at most `s_max` members, by
/// size and then in lexicographic order of member positions.
pub fn subsets_up_to(interaction: &SignedInteraction, s_max: usize) -> Result<Vec<SignedInteraction>> {
    if s_max < 1 {
        return Err(Error::InvalidParameter("s_max must be at least 1".into()));
    }
    let mut out = Vec::new();
    for_each_subset(interaction.members(), s_max, |subset| {
        out.push(SignedInteraction::from_sorted_unchecked(subset.to_vec()));
    });
    Ok(out)
}

/// Calls `f` on every nonempty subset of `members` (assumed canonical) of
/// size at most `s_max`. Subsets are generated size by size, so a long
/// member list never materializes its full power set.
pub(crate) fn for_each_subset<F: FnMut(&[SignedFeature])>(members: &[SignedFeature], s_max: usize, mut f: F) {
    let n = members.len();
    let mut buf: Vec<SignedFeature> = Vec::with_capacity(s_max.min(n));
    let mut idx: Vec<usize> = Vec::with_capacity(s_max.min(n));
    for size in 1..=s_max.min(n) {
        idx.clear();
        idx.extend(0..size);
        loop {
            buf.clear();
            buf.extend(idx.iter().map(|&i| members[i]));
            f(&buf);
            // advance to the next combination in lexicographic order
            let mut i = size;
            while i > 0 && idx[i - 1] == n - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
}
