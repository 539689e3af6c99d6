//! Extremely randomized trees for PRO vs. NONPRO classification,
//! leave-one-player-out model selection and evaluation metrics.

mod balance;
mod cv;
mod forest;
mod metrics;
mod samples;
mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use balance::{balance_by_sampling, balanced_indices};
pub use cv::{default_grid, lopo_cv, CvOutcome, FoldLog, GridScore};
pub use forest::{deserialize_model, serialize_model, train, SkillModel, MODEL_VERSION};
pub use metrics::{evaluate, ClassMetrics, ConfusionMatrix, EvalReport};
pub use samples::Samples;
pub use tree::{Node, Tree};

/// Hyperparameters of one ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub bootstrap: bool,
    /// Candidate attributes drawn per split; 1 gives totally randomized trees.
    pub k_attributes: usize,
    pub min_split: usize,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            n_trees: 500,
            max_depth: 1,
            bootstrap: true,
            k_attributes: 1,
            min_split: 2,
            seed: 0,
        }
    }
}

impl TreeParams {
    pub const MAX_TREES: usize = 1000;
    pub const MIN_TREES: usize = 10;
    pub const MAX_DEPTH: usize = 8;

    pub fn validate(&self, n_features: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(Self::MIN_TREES..=Self::MAX_TREES).contains(&self.n_trees) {
            return bad(format!("n_trees {} outside [10, 1000]", self.n_trees));
        }
        if !(1..=Self::MAX_DEPTH).contains(&self.max_depth) {
            return bad(format!("max_depth {} outside [1, 8]", self.max_depth));
        }
        if self.k_attributes == 0 || self.k_attributes > n_features {
            return bad(format!(
                "k_attributes {} outside [1, {n_features}]",
                self.k_attributes
            ));
        }
        if self.min_split < 2 {
            return bad(format!("min_split {} below 2", self.min_split));
        }
        Ok(())
    }
}
