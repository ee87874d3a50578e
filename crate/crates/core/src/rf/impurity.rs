use crate::error::{Error, Result};

/// Population variance of the labels (divides by the count).
pub fn node_impurity(labels: &[f64]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyNode);
    }
    let n = labels.len() as f64;
    let mean = labels.iter().sum::<f64>() / n;
    Ok(labels.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n)
}

/// Sample-weighted impurity decrease of splitting `node` into `left` and
/// `right`, with every term scaled by its share of the `n_total` training
/// samples.
///
/// The scaling matters: thresholds on this quantity (the `epsilon` of the
/// explanation algorithms) live on the weighted scale, so a root split
/// and a split deep in the tree are not comparable without it.
pub fn impurity_decrease(node: &[f64], left: &[f64], right: &[f64], n_total: usize) -> Result<f64> {
    if node.is_empty() {
        return Err(Error::EmptyNode);
    }
    if n_total < node.len() {
        return Err(Error::PartitionMismatch(format!(
            "node has {} samples but n_total is {n_total}",
            node.len()
        )));
    }
    if !is_partition(node, left, right) {
        return Err(Error::PartitionMismatch(
            "left and right labels do not partition the node".into(),
        ));
    }
    let n = n_total as f64;
    let weighted = |labels: &[f64]| -> f64 {
        if labels.is_empty() {
            0.0
        } else {
            // non-empty, so node_impurity cannot fail
            labels.len() as f64 / n * node_impurity(labels).unwrap_or(0.0)
        }
    };
    Ok(weighted(node) - weighted(left) - weighted(right))
}

fn is_partition(node: &[f64], left: &[f64], right: &[f64]) -> bool {
    if left.len() + right.len() != node.len() {
        return false;
    }
    let mut a: Vec<f64> = node.to_vec();
    let mut b: Vec<f64> = left.iter().chain(right).copied().collect();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits())
}
