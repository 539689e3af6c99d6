use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::{train, Samples, TreeParams};
use crate::error::{Error, Result};

/// Out-of-fold accuracy of one grid point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridScore {
    pub params: TreeParams,
    pub accuracy: f64,
}

/// Which rows a fold held out and trained on (before balancing, which only
/// duplicates training rows).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldLog {
    pub player_id: String,
    pub seed: u64,
    pub held_out: Vec<usize>,
    pub train_rows: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvOutcome {
    pub best: TreeParams,
    /// Out-of-fold PRO probability of every row under `best`.
    pub oof_proba: Vec<f64>,
    pub best_accuracy: f64,
    pub scores: Vec<GridScore>,
    pub folds: Vec<FoldLog>,
}

/// `n_trees ∈ {10, 50, 100, 500, 1000} × max_depth ∈ 1..=8 × bootstrap`.
pub fn default_grid(k_attributes: usize) -> Vec<TreeParams> {
    let mut grid = Vec::new();
    for n_trees in [10, 50, 100, 500, 1000] {
        for max_depth in 1..=8 {
            for bootstrap in [false, true] {
                grid.push(TreeParams {
                    n_trees,
                    max_depth,
                    bootstrap,
                    k_attributes,
                    min_split: 2,
                    seed: 0,
                });
            }
        }
    }
    grid
}

/// Leave-one-player-out cross-validation over `grid`.
///
/// Each fold trains on every other player's rows (balanced inside
/// [`train`]) and scores the held-out player's rows. Grid points that differ
/// only in `n_trees` share one ensemble per fold: tree `t` does not depend
/// on the ensemble size, so the first `n` trees of the largest ensemble are
/// exactly the `n`-tree model. The winner maximizes overall out-of-fold
/// accuracy; ties prefer fewer trees, then shallower trees, then no
/// bootstrap. The `seed` field of grid points is replaced by the fold seed.
pub fn lopo_cv(data: &Samples, grid: &[TreeParams], seed: u64) -> Result<CvOutcome> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if grid.is_empty() {
        return Err(Error::InvalidParams("empty hyperparameter grid".into()));
    }
    for p in grid {
        p.validate(data.n_features())?;
    }
    let players: Vec<&String> = data.groups.iter().collect::<BTreeSet<_>>().into_iter().collect();
    if players.len() < 2 {
        return Err(Error::SinglePlayer);
    }

    let folds: Vec<FoldLog> = players
        .iter()
        .enumerate()
        .map(|(f, &player)| {
            let (held_out, train_rows) = (0..data.len()).partition(|&i| &data.groups[i] == player);
            FoldLog {
                player_id: player.clone(),
                seed: crate::seed::derive(seed, f as u64),
                held_out,
                train_rows,
            }
        })
        .collect();
    for fold in &folds {
        let pro = fold.train_rows.iter().filter(|&&i| data.labels[i]).count();
        if pro == 0 || pro == fold.train_rows.len() {
            return Err(Error::SingleClass);
        }
    }

    // grid points sharing everything but n_trees
    let mut families: BTreeMap<(usize, bool, usize, usize), Vec<usize>> = BTreeMap::new();
    for (g, p) in grid.iter().enumerate() {
        families
            .entry((p.max_depth, p.bootstrap, p.k_attributes, p.min_split))
            .or_default()
            .push(g);
    }
    let jobs: Vec<(&Vec<usize>, &FoldLog)> = families
        .values()
        .flat_map(|members| folds.iter().map(move |fold| (members, fold)))
        .collect();

    let results: Vec<Vec<(usize, usize, f64)>> = jobs
        .par_iter()
        .map(|&(members, fold)| -> Result<Vec<(usize, usize, f64)>> {
            let largest = members.iter().map(|&g| grid[g].n_trees).max().unwrap();
            let params = TreeParams {
                n_trees: largest,
                seed: fold.seed,
                ..grid[members[0]]
            };
            let model = train(&data.subset(&fold.train_rows), &params)?;
            let mut out = Vec::with_capacity(members.len() * fold.held_out.len());
            for &row in &fold.held_out {
                for &g in members {
                    let p = model.predict_proba_prefix(data.row(row), grid[g].n_trees)?;
                    out.push((g, row, p));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut oof = vec![vec![f64::NAN; data.len()]; grid.len()];
    for (g, row, p) in results.into_iter().flatten() {
        oof[g][row] = p;
    }
    let scores: Vec<GridScore> = grid
        .iter()
        .zip(&oof)
        .map(|(p, probs)| {
            let correct = probs
                .iter()
                .zip(&data.labels)
                .filter(|&(&prob, &label)| (prob >= 0.5) == label)
                .count();
            GridScore {
                params: TreeParams { seed, ..*p },
                accuracy: correct as f64 / data.len() as f64,
            }
        })
        .collect();

    let best_idx = (0..grid.len())
        .min_by(|&a, &b| {
            let (sa, sb) = (&scores[a], &scores[b]);
            sb.accuracy
                .total_cmp(&sa.accuracy)
                .then(sa.params.n_trees.cmp(&sb.params.n_trees))
                .then(sa.params.max_depth.cmp(&sb.params.max_depth))
                .then(sa.params.bootstrap.cmp(&sb.params.bootstrap))
                .then(a.cmp(&b))
        })
        .unwrap();
    Ok(CvOutcome {
        best: scores[best_idx].params,
        best_accuracy: scores[best_idx].accuracy,
        oof_proba: oof.swap_remove(best_idx),
        scores,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Six players, two PRO; feature 0 separates the classes by a margin.
    fn separable(noise: bool) -> Samples {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut groups = Vec::new();
        for p in 0..6 {
            let pro = p < 2;
            for w in 0..8 {
                let jitter = ((p * 8 + w) * 37 % 100) as f64 / 100.0;
                let base = if pro { 5.0 } else { 0.0 };
                let mut row = vec![base + jitter];
                if noise {
                    row.extend([jitter * 3.0, (w as f64).sin()]);
                }
                rows.push(row);
                labels.push(pro);
                groups.push(format!("player{p}"));
            }
        }
        let names = ["sep", "n1", "n2"][..rows[0].len()].iter().map(|s| s.to_string()).collect();
        Samples::new(names, &rows, labels, groups).unwrap()
    }

    fn grid(n_trees: &[usize]) -> Vec<TreeParams> {
        n_trees
            .iter()
            .map(|&n| TreeParams { n_trees: n, max_depth: 2, bootstrap: false, ..Default::default() })
            .collect()
    }

    #[test]
    fn folds_partition_rows_without_leakage() {
        let data = separable(true);
        let out = lopo_cv(&data, &grid(&[10]), 1).unwrap();
        assert_eq!(out.folds.len(), 6);
        let mut seen = vec![0; data.len()];
        for f in &out.folds {
            for &i in &f.held_out {
                seen[i] += 1;
                assert_eq!(data.groups[i], f.player_id);
            }
            assert!(f.train_rows.iter().all(|&i| data.groups[i] != f.player_id));
            assert_eq!(f.held_out.len() + f.train_rows.len(), data.len());
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert!(out.oof_proba.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn prefix_sharing_matches_independent_training() {
        let data = separable(true);
        let shared = lopo_cv(&data, &grid(&[10, 50]), 7).unwrap();
        let alone = lopo_cv(&data, &grid(&[10]), 7).unwrap();
        assert_eq!(shared.scores[0].accuracy, alone.scores[0].accuracy);
        assert_eq!(shared.folds, alone.folds);

        let fold = &alone.folds[2];
        let train_set = data.subset(&fold.train_rows);
        let params = |n| TreeParams { n_trees: n, max_depth: 2, bootstrap: false, seed: fold.seed, ..Default::default() };
        let big = train(&train_set, &params(50)).unwrap();
        let small = train(&train_set, &params(10)).unwrap();
        for &i in &fold.held_out {
            let p = small.predict_proba(data.row(i)).unwrap();
            assert_eq!(big.predict_proba_prefix(data.row(i), 10).unwrap(), p);
            assert_eq!(alone.oof_proba[i], p);
        }
    }

    #[test]
    fn tie_break_prefers_small_shallow_no_bootstrap() {
        let data = separable(false);
        let mut g = Vec::new();
        for n_trees in [50, 10] {
            for max_depth in [3, 1] {
                for bootstrap in [true, false] {
                    g.push(TreeParams { n_trees, max_depth, bootstrap, ..Default::default() });
                }
            }
        }
        let out = lopo_cv(&data, &g, 3).unwrap();
        assert!(out.scores.iter().all(|s| s.accuracy == 1.0));
        assert_eq!((out.best.n_trees, out.best.max_depth, out.best.bootstrap), (10, 1, false));
    }

    #[test]
    fn single_player_rejected() {
        let data = separable(true);
        let idx: Vec<usize> = (0..8).collect();
        assert!(matches!(lopo_cv(&data.subset(&idx), &grid(&[10]), 0), Err(Error::SinglePlayer)));
    }

    #[test]
    fn default_grid_shape() {
        let g = default_grid(1);
        assert_eq!(g.len(), 80);
        assert!(g.iter().all(|p| p.validate(9).is_ok()));
    }
}
