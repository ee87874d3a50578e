//! Recovery of locally important signed features and interactions from
//! CART random forests.
//!
//! The pipeline: grow a forest ([`rf`]), read first-occurrence signed
//! feature sets off its paths ([`signed`]), aggregate them into
//! depth-weighted and path prevalence tables ([`prevalence`]), and select
//! or score interactions for a test point ([`explain`]). [`sim`] generates
//! data with known local ground truth and [`evaluation`] scores rankings
//! against it.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod explain;
pub mod prevalence;
pub mod rf;
pub mod signed;
pub mod sim;

pub use dataset::{Dataset, LabelColumn};
pub use error::{Error, Result};
pub use rf::{fit_forest, Forest, ForestParams};
pub use signed::{Sign, SignedFeature, SignedInteraction};
