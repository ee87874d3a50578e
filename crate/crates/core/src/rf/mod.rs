//! CART regression trees and forests.

mod forest;
mod impurity;
mod split;
mod tree;

pub use forest::{fit_forest, tree_rng, Forest, ForestParams, FOREST_FORMAT_VERSION};
pub use impurity::{impurity_decrease, node_impurity};
pub use split::{best_split, Cell, ConstraintFlags, SplitCandidate, DEFAULT_C_GAMMA};
pub use tree::{default_mtry, fit_tree, Node, Tree, TreeParams};
