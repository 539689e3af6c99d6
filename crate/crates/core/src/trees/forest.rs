use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::balance::balanced_indices;
use super::tree::{grow, GrowConfig, Node, Tree};
use super::{Samples, TreeParams};
use crate::error::{Error, Result};

pub const MODEL_VERSION: u32 = 1;

/// Trained ensemble. Immutable; safe to share across threads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkillModel {
    pub version: u32,
    pub params: TreeParams,
    pub feature_names: Vec<String>,
    /// Per-feature sum over trees of `node_fraction × gini_decrease`.
    pub importance: Vec<f64>,
    pub trees: Vec<Tree>,
}

/// Stream 0 drives class balancing; tree `t` draws from stream `t + 1`, so
/// every tree is independent of how many others are grown and of the
/// thread schedule.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Trains an extremely randomized trees ensemble on a class-balanced copy
/// of `data`.
///
/// At each node `k_attributes` distinct non-constant features are drawn,
/// each gets one uniform random threshold strictly inside the node's value
/// range, and the candidate with the largest Gini decrease is kept. Nodes
/// stop splitting at `max_depth`, when pure, or below `min_split` rows.
pub fn train(data: &Samples, params: &TreeParams) -> Result<SkillModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    params.validate(data.n_features())?;
    let balanced = balanced_indices(&data.labels, &mut stream(params.seed, 0))?;
    let cfg = GrowConfig {
        max_depth: params.max_depth,
        k_attributes: params.k_attributes,
        min_split: params.min_split,
    };
    let grown: Vec<(Tree, Vec<f64>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(params.seed, t as u64 + 1);
            let rows = if params.bootstrap {
                (0..balanced.len())
                    .map(|_| balanced[rng.random_range(0..balanced.len())])
                    .collect()
            } else {
                balanced.clone()
            };
            grow(data, rows, &cfg, &mut rng)
        })
        .collect();

    let mut importance = vec![0.0; data.n_features()];
    let mut trees = Vec::with_capacity(grown.len());
    for (tree, imp) in grown {
        for (acc, v) in importance.iter_mut().zip(imp) {
            *acc += v;
        }
        trees.push(tree);
    }
    Ok(SkillModel {
        version: MODEL_VERSION,
        params: *params,
        feature_names: data.feature_names.clone(),
        importance,
        trees,
    })
}

impl SkillModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_features() {
            return Err(Error::MissingFeature {
                expected: self.n_features(),
                got: row.len(),
            });
        }
        Ok(())
    }

    /// Mean PRO probability over all trees.
    pub fn predict_proba(&self, row: &[f64]) -> Result<f64> {
        self.predict_proba_prefix(row, self.trees.len())
    }

    /// Mean PRO probability over the first `n_trees` trees, which equals the
    /// prediction of the same configuration trained with only `n_trees`.
    pub fn predict_proba_prefix(&self, row: &[f64], n_trees: usize) -> Result<f64> {
        self.check_row(row)?;
        let n = n_trees.min(self.trees.len());
        let sum: f64 = self.trees[..n].iter().map(|t| t.predict_pro(row)).sum();
        Ok(sum / n as f64)
    }

    /// PRO iff probability ≥ threshold.
    pub fn predict(&self, row: &[f64], threshold: f64) -> Result<bool> {
        Ok(self.predict_proba(row)? >= threshold)
    }

    /// Normalized impurity importances, one per feature.
    pub fn feature_importances(&self) -> Result<Vec<f64>> {
        let total: f64 = self.importance.iter().sum();
        if self.trees.iter().all(|t| t.n_splits() == 0) || total <= 0.0 {
            return Err(Error::NoSplits);
        }
        // averaging over trees cancels in the normalization
        Ok(self.importance.iter().map(|v| v / total).collect())
    }

    pub fn max_tree_depth(&self) -> usize {
        self.trees.iter().map(Tree::depth).max().unwrap_or(0)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::SchemaViolation(m));
        if self.version != MODEL_VERSION {
            return bad(format!("unsupported version {}", self.version));
        }
        let f = self.feature_names.len();
        if f == 0 || self.importance.len() != f {
            return bad("feature_names/importance length mismatch".into());
        }
        if self.importance.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("importance must be finite and nonnegative".into());
        }
        self.params
            .validate(f)
            .or_else(|e| bad(format!("params: {e}")))?;
        if self.trees.len() != self.params.n_trees {
            return bad(format!(
                "{} trees but n_trees = {}",
                self.trees.len(),
                self.params.n_trees
            ));
        }
        for (t, tree) in self.trees.iter().enumerate() {
            let n = tree.nodes.len();
            if n == 0 {
                return bad(format!("tree {t} is empty"));
            }
            let mut referenced = vec![false; n];
            for (i, node) in tree.nodes.iter().enumerate() {
                match node {
                    Node::Leaf { leaf } => {
                        let ok = leaf.iter().all(|p| (0.0..=1.0).contains(p))
                            && (leaf[0] + leaf[1] - 1.0).abs() <= 1e-9;
                        if !ok {
                            return bad(format!("tree {t} node {i}: bad leaf probabilities"));
                        }
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        if *feature >= f || !threshold.is_finite() {
                            return bad(format!("tree {t} node {i}: bad split"));
                        }
                        for &c in [left, right] {
                            if c <= i || c >= n || referenced[c] {
                                return bad(format!("tree {t} node {i}: bad child {c}"));
                            }
                            referenced[c] = true;
                        }
                    }
                }
            }
            if referenced.iter().skip(1).any(|r| !r) {
                return bad(format!("tree {t} has unreachable nodes"));
            }
            if tree.depth() > self.params.max_depth {
                return bad(format!("tree {t} deeper than max_depth"));
            }
        }
        Ok(())
    }
}

/// Versioned JSON document of the model.
pub fn serialize_model(model: &SkillModel) -> String {
    serde_json::to_string(model).expect("model serializes")
}

pub fn deserialize_model(text: &str) -> Result<SkillModel> {
    let model: SkillModel =
        serde_json::from_str(text).map_err(|e| Error::SchemaViolation(e.to_string()))?;
    model.validate()?;
    Ok(model)
}
