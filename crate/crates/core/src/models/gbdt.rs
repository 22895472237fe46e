//! Least-squares gradient-boosted trees, used for split-gain feature ranking.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::tree::{grow, RegressionTree};
use crate::error::{Error, Result};
use crate::ingest::TabularDataset;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtConfig {
    pub num_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    /// Fraction of training rows drawn (without replacement) per tree.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            num_trees: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 5,
            subsample: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gbdt {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

impl Gbdt {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.base + self.learning_rate * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    /// Total split gain per feature.
    pub fn split_gains(&self, n_features: usize) -> Vec<f64> {
        let mut g = vec![0.0; n_features];
        for t in &self.trees {
            for node in &t.nodes {
                if let Some(s) = node.split {
                    g[s.feature] += s.gain;
                }
            }
        }
        g
    }
}

pub fn fit_gbdt(ds: &TabularDataset, cfg: &GbdtConfig) -> Result<Gbdt> {
    if !(cfg.subsample > 0.0 && cfg.subsample <= 1.0) {
        return Err(Error::InvalidArgument("subsample must lie in (0, 1]".into()));
    }
    let rows = ds.train_indices();
    if rows.is_empty() {
        return Err(Error::Empty("training split".into()));
    }
    let y = ds.y();
    let base = rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64;
    let mut residual: Vec<f64> = y.iter().map(|v| v - base).collect();
    let mut rng = stats::rng(cfg.seed);
    let per_tree = ((rows.len() as f64) * cfg.subsample).round().max(1.0) as usize;
    let mut trees = Vec::with_capacity(cfg.num_trees);
    for _ in 0..cfg.num_trees {
        let sub: Vec<usize> = if per_tree >= rows.len() {
            rows.clone()
        } else {
            let mut s: Vec<usize> = sample(&mut rng, rows.len(), per_tree)
                .into_iter()
                .map(|k| rows[k])
                .collect();
            s.sort_unstable();
            s
        };
        let tree = grow(ds.x(), &residual, &sub, cfg.max_depth, cfg.min_samples_leaf);
        if tree.n_splits() == 0 {
            break;
        }
        for &i in &rows {
            residual[i] -= cfg.learning_rate * tree.predict_row(ds.x().row(i));
        }
        trees.push(tree);
    }
    Ok(Gbdt {
        base,
        learning_rate: cfg.learning_rate,
        trees,
    })
}
