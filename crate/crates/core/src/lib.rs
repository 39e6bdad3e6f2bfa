//! Extreme multi-label classification with shallow, unbalanced label trees.
//!
//! Labels are embedded (by their instances, their co-occurrences, or both), partitioned
//! recursively by K-means with a large branching factor, and every tree node learns one-vs-all
//! squared-hinge linear classifiers. Prediction walks the trees with beam search and averages the
//! ensemble's chain-rule label probabilities.

pub mod cluster;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
mod par;
pub mod predict;
pub mod repr;
pub mod solver;
pub mod sparse;
pub mod tree;

pub use data::{Dataset, DatasetStats, LabelIndex};
pub use error::{Error, Result};
pub use metrics::{EvalReport, PropensityModel};
pub use model::{load_model, save_model};
pub use predict::{predict_batch, predict_ensemble, predict_tree, ScoredLabels};
pub use repr::{LabelRepr, ReprSpace};
pub use sparse::{Index, SparseRowMatrix, SparseVec};
pub use tree::{train_ensemble, Ensemble, TrainConfig, Tree, TreeNode};
