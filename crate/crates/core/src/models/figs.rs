//! Fast interpretable greedy-tree sums.
//!
//! The model is a sum of small trees. Every iteration considers splitting any
//! current leaf of any tree, or starting a new tree with a root stump, each
//! scored on the residual left by all *other* trees, and applies the single
//! best split.

use serde::{Deserialize, Serialize};

use super::tree::{best_split, node_stats, RegressionTree, SplitCandidate};
use super::{FittedModel, ModelParams, ModelSpec};
use crate::error::{Error, Result};
use crate::ingest::TabularDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FigsSpec {
    pub max_depth: usize,
    /// Total split budget across all trees.
    pub max_splits: usize,
    pub min_samples_leaf: usize,
}

impl Default for FigsSpec {
    fn default() -> Self {
        FigsSpec {
            max_depth: 5,
            max_splits: 100,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigsModel {
    pub trees: Vec<RegressionTree>,
}

impl FigsModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum()
    }

    pub fn n_splits(&self) -> usize {
        self.trees.iter().map(RegressionTree::n_splits).sum()
    }
}

struct Grown {
    tree: RegressionTree,
    /// Training rows per node; only meaningful for leaves.
    rows: Vec<Vec<usize>>,
    /// This tree's prediction for every dataset row.
    pred: Vec<f64>,
}

impl Grown {
    fn refit_leaves(&mut self, residual: &[f64]) {
        for leaf in self.tree.leaves().collect::<Vec<_>>() {
            let rows = &self.rows[leaf];
            if rows.is_empty() {
                continue;
            }
            let (mean, sse) = node_stats(residual, rows);
            self.tree.nodes[leaf].value = mean;
            self.tree.nodes[leaf].sse = sse;
            for &i in rows {
                self.pred[i] = mean;
            }
        }
    }
}

struct Choice {
    tree: Option<usize>,
    leaf: usize,
    cand: SplitCandidate,
}

/// CART ordering on (gain desc, feature asc, threshold asc); candidates are
/// visited oldest tree first so an exact tie keeps the older tree.
fn beats(cand: &SplitCandidate, best: &Option<Choice>) -> bool {
    match best {
        None => true,
        Some(b) => {
            let c = &b.cand;
            cand.gain > c.gain
                || (cand.gain == c.gain
                    && (cand.feature, cand.threshold) < (c.feature, c.threshold))
        }
    }
}

pub fn fit_figs(ds: &TabularDataset, spec: &FigsSpec) -> Result<FittedModel> {
    if spec.max_splits < 1 || spec.max_depth < 1 {
        return Err(Error::InvalidArgument("max_splits and max_depth must be at least 1".into()));
    }
    let rows = ds.train_indices();
    if rows.is_empty() {
        return Err(Error::Empty("training split".into()));
    }
    let x = ds.x();
    let y = ds.y();
    let n = ds.n_rows();
    let mut grown: Vec<Grown> = Vec::new();
    let mut residual = vec![0.0; n];

    for _ in 0..spec.max_splits {
        let total: Vec<f64> = (0..n)
            .map(|i| grown.iter().map(|g| g.pred[i]).sum::<f64>())
            .collect();
        let mut best: Option<Choice> = None;
        for (t, g) in grown.iter().enumerate() {
            for &i in &rows {
                residual[i] = y[i] - (total[i] - g.pred[i]);
            }
            for leaf in g.tree.leaves() {
                if g.tree.nodes[leaf].depth >= spec.max_depth {
                    continue;
                }
                if let Some(cand) = best_split(x, &residual, &g.rows[leaf], spec.min_samples_leaf) {
                    if beats(&cand, &best) {
                        best = Some(Choice { tree: Some(t), leaf, cand });
                    }
                }
            }
        }
        for &i in &rows {
            residual[i] = y[i] - total[i];
        }
        if let Some(cand) = best_split(x, &residual, &rows, spec.min_samples_leaf) {
            if beats(&cand, &best) {
                best = Some(Choice { tree: None, leaf: 0, cand });
            }
        }
        let Some(choice) = best else { break };

        let t = match choice.tree {
            Some(t) => t,
            None => {
                let (mean, sse) = node_stats(&residual, &rows);
                let mut pred = vec![0.0; n];
                for &i in &rows {
                    pred[i] = mean;
                }
                grown.push(Grown {
                    tree: RegressionTree::leaf(mean, rows.len(), sse),
                    rows: vec![rows.clone()],
                    pred,
                });
                grown.len() - 1
            }
        };
        for &i in &rows {
            residual[i] = y[i] - (total[i] - if choice.tree.is_some() { grown[t].pred[i] } else { 0.0 });
        }
        let g = &mut grown[t];
        g.tree.split_leaf(choice.leaf, &choice.cand);
        g.rows.push(choice.cand.left.clone());
        g.rows.push(choice.cand.right.clone());
        g.rows[choice.leaf].clear();
        g.refit_leaves(&residual);
    }

    let trees = grown
        .into_iter()
        .map(|mut g| {
            g.tree.refresh_internal_values();
            g.tree
        })
        .collect();
    Ok(FittedModel::new(
        ModelSpec::Figs(spec.clone()),
        ds.feature_names().to_vec(),
        ModelParams::Figs(FigsModel { trees }),
    ))
}
