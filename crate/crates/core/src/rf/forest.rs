use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split::ConstraintFlags;
use super::tree::{default_mtry, grow, Presorted, Tree, TreeParams};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Version written into serialized forests.
pub const FOREST_FORMAT_VERSION: u32 = 1;

/// Forest training parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` means `ceil(p / 2)`.
    pub mtry: Option<usize>,
    pub seed: u64,
    pub min_node_size: usize,
    pub constraints: ConstraintFlags,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 500,
            mtry: None,
            seed: 0,
            min_node_size: 1,
            constraints: ConstraintFlags::default(),
        }
    }
}

/// An ensemble of CART trees, all grown on the same training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub format_version: u32,
    pub n_features: usize,
    pub n_samples: usize,
    pub mtry: usize,
    pub seed: u64,
    pub min_node_size: usize,
    pub constraint_flags: ConstraintFlags,
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
}

/// Random stream for tree `index`: the forest seed picks the key, the tree
/// index the ChaCha stream, so trees are independent of training order.
pub fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Trains `n_trees` trees in parallel. Output depends only on the data and
/// parameters, not on the number of worker threads.
pub fn fit_forest(data: &Dataset, params: &ForestParams) -> Result<Forest> {
    if params.n_trees < 1 {
        return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
    }
    let p = data.n_features();
    let tree_params = TreeParams {
        mtry: params.mtry.unwrap_or_else(|| default_mtry(p)),
        min_node_size: params.min_node_size,
        constraints: params.constraints,
    };
    tree_params.validate(p)?;
    let presorted = Presorted::new(data);
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| grow(data, &presorted, &tree_params, &mut tree_rng(params.seed, t)))
        .collect();
    Ok(Forest {
        format_version: FOREST_FORMAT_VERSION,
        n_features: p,
        n_samples: data.n_samples(),
        mtry: tree_params.mtry,
        seed: params.seed,
        min_node_size: params.min_node_size,
        constraint_flags: params.constraints,
        feature_names: data.feature_names().to_vec(),
        trees,
    })
}

impl Forest {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn check_dimension(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Average of the tree predictions.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_dimension(x)?;
        Ok(self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.n_trees() as f64)
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        let forest: Forest = serde_json::from_reader(reader)?;
        if forest.format_version != FOREST_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(forest.format_version));
        }
        if forest.trees.is_empty() {
            return Err(Error::InvalidParameter("forest has no trees".into()));
        }
        for tree in &forest.trees {
            tree.validate(forest.n_features)?;
        }
        Ok(forest)
    }
}
