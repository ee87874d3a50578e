use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;

/// A split of a node on `feature` at `threshold`: samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    /// Weighted impurity decrease (see [`impurity_decrease`](super::impurity_decrease)).
    pub impurity_decrease: f64,
}

/// Optional restrictions on how trees are grown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstraintFlags {
    /// Only accept splits whose two child cells have a volume ratio above
    /// `c_gamma / (1 - c_gamma)`. Cells start from the unit cube, so this
    /// mode expects features scaled to `[0, 1]`.
    pub balanced_split: bool,
    /// Grow every tree on the full training set. Resampling is not
    /// supported, so this must stay `true`.
    pub no_resampling: bool,
    pub c_gamma: f64,
}

pub const DEFAULT_C_GAMMA: f64 = 0.1;

impl Default for ConstraintFlags {
    fn default() -> Self {
        ConstraintFlags {
            balanced_split: false,
            no_resampling: true,
            c_gamma: DEFAULT_C_GAMMA,
        }
    }
}

impl ConstraintFlags {
    /// Balanced splits on, as assumed by the consistency theory.
    pub fn theory() -> Self {
        ConstraintFlags {
            balanced_split: true,
            ..Self::default()
        }
    }

    pub(crate) fn min_volume_ratio(&self) -> Option<f64> {
        self.balanced_split
            .then(|| self.c_gamma / (1.0 - self.c_gamma))
    }
}

/// Axis-aligned cell of a node, tracked from the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    bounds: Vec<(f64, f64)>,
}

impl Cell {
    pub fn unit(p: usize) -> Self {
        Cell {
            bounds: vec![(0.0, 1.0); p],
        }
    }

    pub fn bounds(&self, feature: usize) -> (f64, f64) {
        self.bounds[feature]
    }

    /// Returns the (left, right) child cells of a split.
    pub fn split(&self, feature: usize, threshold: f64) -> (Cell, Cell) {
        let mut left = self.clone();
        let mut right = self.clone();
        left.bounds[feature].1 = threshold;
        right.bounds[feature].0 = threshold;
        (left, right)
    }

    /// Whether the split leaves both children with a volume ratio strictly
    /// above `min_ratio`. Only the split side length changes, so the volume
    /// ratio is the ratio of the two side lengths.
    pub fn is_balanced(&self, feature: usize, threshold: f64, min_ratio: f64) -> bool {
        let (lo, hi) = self.bounds[feature];
        let left = threshold - lo;
        let right = hi - threshold;
        if left <= 0.0 || right <= 0.0 {
            return false;
        }
        (left / right).min(right / left) > min_ratio
    }
}

/// Relative slack under which two decreases count as tied.
pub(crate) const TIE_TOLERANCE: f64 = 1e-12;

/// Whether a candidate gain replaces the incumbent. Candidates arrive in
/// (feature, threshold) ascending order, so ties keep the earliest one.
pub(crate) fn improves(candidate: f64, incumbent: Option<f64>) -> bool {
    match incumbent {
        None => true,
        Some(best) => candidate > best + TIE_TOLERANCE * best.abs(),
    }
}

/// Midpoint threshold separating `a < b`, nudged down to `a` if rounding
/// pushes it onto `b`.
pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    let mid = a + (b - a) / 2.0;
    if mid >= b {
        a
    } else {
        mid
    }
}

/// Per-node state shared by the scan over each candidate feature.
pub(crate) struct NodeStats {
    pub mean: f64,
    /// Sum of squared deviations from the mean.
    pub sse: f64,
    /// Sum of centered labels; zero up to rounding.
    pub centered_sum: f64,
    /// All labels bitwise identical.
    pub constant: bool,
}

impl NodeStats {
    pub fn new<I: Iterator<Item = f64> + Clone>(labels: I) -> Self {
        let mut first = None;
        let mut constant = true;
        let (n, sum) = labels.clone().fold((0usize, 0.0), |(n, s), y| {
            match first {
                None => first = Some(y),
                Some(f) => constant &= f == y,
            }
            (n + 1, s + y)
        });
        let mean = if constant { first.unwrap_or(0.0) } else { sum / n as f64 };
        let (sse, centered_sum) = labels.fold((0.0, 0.0), |(q, s), y| {
            let d = y - mean;
            (q + d * d, s + d)
        });
        NodeStats {
            mean,
            sse,
            centered_sum,
            constant,
        }
    }

    /// Smallest SSE reduction treated as a genuine improvement.
    pub fn min_gain(&self) -> f64 {
        TIE_TOLERANCE * self.sse
    }
}

/// Best split so far, tracked in unscaled SSE units.
#[derive(Debug, Default)]
pub(crate) struct BestSplit {
    pub gain: Option<f64>,
    pub feature: usize,
    pub threshold: f64,
    /// Samples on the left side.
    pub n_left: usize,
}

impl BestSplit {
    pub fn into_candidate(self, n_total: usize) -> Option<SplitCandidate> {
        self.gain.map(|g| SplitCandidate {
            feature: self.feature,
            threshold: self.threshold,
            impurity_decrease: g / n_total as f64,
        })
    }
}

/// Scans one feature whose node samples are given in ascending value order.
///
/// Uses `SSE(node) - SSE(left) - SSE(right) = sl^2/nl + sr^2/nr - s^2/n` on
/// labels centered at the node mean, which avoids the cancellation of the
/// raw sum-of-squares form.
#[allow(clippy::too_many_arguments)]
pub(crate) fn scan_sorted(
    feature: usize,
    order: &[u32],
    column: &[f64],
    labels: &[f64],
    stats: &NodeStats,
    cell: Option<(&Cell, f64)>,
    best: &mut BestSplit,
) {
    let n = order.len();
    let min_gain = stats.min_gain();
    let total_term = stats.centered_sum * stats.centered_sum / n as f64;
    let mut left_sum = 0.0;
    for i in 0..n - 1 {
        let idx = order[i] as usize;
        left_sum += labels[idx] - stats.mean;
        let a = column[idx];
        let b = column[order[i + 1] as usize];
        if !(a < b) {
            continue;
        }
        let nl = (i + 1) as f64;
        let nr = (n - i - 1) as f64;
        let right_sum = stats.centered_sum - left_sum;
        let gain = left_sum * left_sum / nl + right_sum * right_sum / nr - total_term;
        if gain <= min_gain || !improves(gain, best.gain) {
            continue;
        }
        let threshold = midpoint(a, b);
        if let Some((cell, min_ratio)) = cell {
            if !cell.is_balanced(feature, threshold, min_ratio) {
                continue;
            }
        }
        *best = BestSplit {
            gain: Some(gain),
            feature,
            threshold,
            n_left: i + 1,
        };
    }
}

/// Finds the split maximizing the impurity decrease over `candidate_features`
/// for the node holding `samples`.
///
/// Thresholds are midpoints between consecutive distinct values. Ties go to
/// the lowest feature index, then the lowest threshold. Returns `None` when
/// no candidate has a positive decrease (including constant-label nodes and
/// nodes with fewer than two samples).
pub fn best_split(
    data: &Dataset,
    samples: &[usize],
    candidate_features: &[usize],
    flags: &ConstraintFlags,
    cell: &Cell,
) -> Option<SplitCandidate> {
    if samples.len() < 2 {
        return None;
    }
    let labels = data.labels();
    let stats = NodeStats::new(samples.iter().map(|&i| labels[i]));
    if stats.constant {
        return None;
    }
    let mut features = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();
    let balance = flags.min_volume_ratio().map(|r| (cell, r));
    let mut best = BestSplit::default();
    let mut order: Vec<u32> = Vec::with_capacity(samples.len());
    for &k in &features {
        let column = data.column(k);
        order.clear();
        order.extend(samples.iter().map(|&i| i as u32));
        order.sort_by(|&a, &b| column[a as usize].total_cmp(&column[b as usize]).then(a.cmp(&b)));
        scan_sorted(k, &order, column, labels, &stats, balance, &mut best);
    }
    best.into_candidate(data.n_samples())
}
