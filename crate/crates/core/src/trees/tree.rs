use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Samples;

/// Node of a flattened binary tree. Children always have larger indices
/// than their parent; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// `[p_nonpro, p_pro]`.
    Leaf { leaf: [f64; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_pro(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { leaf } => return leaf[1],
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] < *threshold { *left } else { *right },
            }
        }
    }

    /// Longest root-to-leaf path, counted in edges.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_splits(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Split { .. }))
            .count()
    }
}

pub(crate) struct GrowConfig {
    pub max_depth: usize,
    pub k_attributes: usize,
    pub min_split: usize,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

/// Weighted Gini impurity decrease of splitting `(pos, n)` into a left part
/// `(pos_l, n_l)` and the remainder.
pub(crate) fn gini_decrease(pos: usize, n: usize, pos_l: usize, n_l: usize) -> f64 {
    let (pos_r, n_r) = (pos - pos_l, n - n_l);
    let nf = n as f64;
    let d = gini(pos, n) - n_l as f64 / nf * gini(pos_l, n_l) - n_r as f64 / nf * gini(pos_r, n_r);
    d.max(0.0)
}

/// Uniform draw strictly inside `(lo, hi)`, or `None` if no float lies
/// strictly between them.
fn draw_threshold<R: Rng>(lo: f64, hi: f64, rng: &mut R) -> Option<f64> {
    let mid = lo + (hi - lo) / 2.0;
    if !(mid > lo && mid < hi) {
        return None;
    }
    for _ in 0..64 {
        let t = lo + rng.random::<f64>() * (hi - lo);
        if t > lo && t < hi {
            return Some(t);
        }
    }
    Some(mid)
}

/// Grows one extremely randomized tree over `rows` (indices into `data`,
/// duplicates allowed). Returns the tree and the per-feature sum of
/// `node_fraction × gini_decrease` over its splits.
pub(crate) fn grow<R: Rng>(
    data: &Samples,
    mut rows: Vec<usize>,
    cfg: &GrowConfig,
    rng: &mut R,
) -> (Tree, Vec<f64>) {
    let n_features = data.n_features();
    let n_root = rows.len() as f64;
    let mut importance = vec![0.0; n_features];
    let mut nodes: Vec<Node> = Vec::new();
    let mut feature_pool: Vec<usize> = (0..n_features).collect();

    // (slot in `nodes`, row range, depth); left child is processed first
    nodes.push(Node::Leaf { leaf: [0.5, 0.5] });
    let mut stack = vec![(0usize, 0usize, rows.len(), 0usize)];
    while let Some((slot, lo, hi, depth)) = stack.pop() {
        let n = hi - lo;
        let pos = rows[lo..hi].iter().filter(|&&i| data.labels[i]).count();
        let leaf = Node::Leaf {
            leaf: [(n - pos) as f64 / n as f64, pos as f64 / n as f64],
        };
        if depth >= cfg.max_depth || pos == 0 || pos == n || n < cfg.min_split {
            nodes[slot] = leaf;
            continue;
        }

        // draw attributes without replacement, skipping ones constant here
        let mut best: Option<(usize, f64, f64, usize)> = None;
        let mut found = 0;
        let mut remaining = n_features;
        while found < cfg.k_attributes && remaining > 0 {
            let pick = rng.random_range(0..remaining);
            remaining -= 1;
            feature_pool.swap(pick, remaining);
            let f = feature_pool[remaining];
            let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &rows[lo..hi] {
                let v = data.value(i, f);
                min = min.min(v);
                max = max.max(v);
            }
            let Some(threshold) = draw_threshold(min, max, rng) else {
                continue;
            };
            found += 1;
            let (mut n_l, mut pos_l) = (0, 0);
            for &i in &rows[lo..hi] {
                if data.value(i, f) < threshold {
                    n_l += 1;
                    pos_l += usize::from(data.labels[i]);
                }
            }
            let score = gini_decrease(pos, n, pos_l, n_l);
            if best.is_none_or(|(_, _, s, _)| score > s) {
                best = Some((f, threshold, score, n_l));
            }
        }
        let Some((feature, threshold, score, n_l)) = best else {
            nodes[slot] = leaf;
            continue;
        };

        // stable partition of the node's rows
        let (left, right): (Vec<usize>, Vec<usize>) = rows[lo..hi]
            .iter()
            .partition(|&&i| data.value(i, feature) < threshold);
        rows[lo..lo + n_l].copy_from_slice(&left);
        rows[lo + n_l..hi].copy_from_slice(&right);

        importance[feature] += n as f64 / n_root * score;
        let left_slot = nodes.len();
        let right_slot = left_slot + 1;
        nodes.push(Node::Leaf { leaf: [0.5, 0.5] });
        nodes.push(Node::Leaf { leaf: [0.5, 0.5] });
        nodes[slot] = Node::Split {
            feature,
            threshold,
            left: left_slot,
            right: right_slot,
        };
        stack.push((right_slot, lo + n_l, hi, depth + 1));
        stack.push((left_slot, lo, lo + n_l, depth + 1));
    }
    (Tree { nodes }, importance)
}
