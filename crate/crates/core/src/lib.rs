//! Conditional modes mixture model for clustering categorical data.

pub mod bayes;
pub mod data;
pub mod em;
pub mod encode;
pub mod error;
pub mod eval;
pub mod likelihood;
pub mod model;
pub mod rng;
pub mod search;
pub mod sim;
pub mod special_fn;
pub mod stats;

pub use data::{CategoricalDataset, Schema, Variable};
pub use encode::EncodedData;
pub use error::{CmmError, Result};
pub use model::{BlockParams, BlockPartition, CmmModel, MixtureParams, ModelSpec};
pub use rng::Seed;
pub use stats::SufficientStats;
