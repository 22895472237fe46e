//! Greedy CART regression tree.

use serde::{Deserialize, Serialize};

use super::tree::grow;
use super::{FittedModel, ModelParams, ModelSpec};
use crate::error::{Error, Result};
use crate::ingest::TabularDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    SquaredError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeSpec {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Cost-complexity parameter; 0 disables pruning.
    pub prune_alpha: f64,
}

impl Default for TreeSpec {
    fn default() -> Self {
        TreeSpec {
            criterion: Criterion::SquaredError,
            max_depth: 5,
            min_samples_leaf: 5,
            prune_alpha: 0.0,
        }
    }
}

pub fn fit_decision_tree(ds: &TabularDataset, spec: &TreeSpec) -> Result<FittedModel> {
    if spec.max_depth < 1 || spec.min_samples_leaf < 1 {
        return Err(Error::InvalidArgument(
            "max_depth and min_samples_leaf must be at least 1".into(),
        ));
    }
    let rows = ds.train_indices();
    if rows.is_empty() {
        return Err(Error::Empty("training split".into()));
    }
    let mut tree = grow(ds.x(), ds.y(), &rows, spec.max_depth, spec.min_samples_leaf);
    tree.prune(spec.prune_alpha, rows.len());
    Ok(FittedModel::new(
        ModelSpec::Tree(spec.clone()),
        ds.feature_names().to_vec(),
        ModelParams::Tree(tree),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Predictor;
    use crate::Matrix;

    fn step_data() -> TabularDataset {
        let xs: Vec<f64> = (0..20).map(|i| f64::from(i) / 19.0).collect();
        let y: Vec<f64> = xs.iter().map(|&v| if v > 0.5 { 1.0 } else { 0.0 }).collect();
        let noise: Vec<f64> = (0..20).map(|i| f64::from((i * 7) % 20)).collect();
        let x = Matrix::from_columns(&[noise, xs]).unwrap();
        TabularDataset::new(vec!["noise".into(), "x".into()], x, y, vec![true; 20]).unwrap()
    }

    /// Exhaustive stump oracle: every feature, every midpoint, SSE by
    /// direct summation.
    fn oracle_stump(ds: &TabularDataset) -> (usize, f64, f64) {
        let x = ds.x();
        let y = ds.y();
        let mut best = (usize::MAX, f64::NAN, f64::INFINITY);
        for j in 0..x.ncols() {
            let mut vals = x.column(j);
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = 0.5 * (w[0] + w[1]);
                let (l, r): (Vec<f64>, Vec<f64>) = {
                    let mut l = vec![];
                    let mut r = vec![];
                    for i in 0..y.len() {
                        if x.get(i, j) <= t {
                            l.push(y[i]);
                        } else {
                            r.push(y[i]);
                        }
                    }
                    (l, r)
                };
                let sse = |v: &[f64]| {
                    let m = v.iter().sum::<f64>() / v.len() as f64;
                    v.iter().map(|a| (a - m).powi(2)).sum::<f64>()
                };
                let total = sse(&l) + sse(&r);
                if total < best.2 {
                    best = (j, t, total);
                }
            }
        }
        best
    }

    #[test]
    fn step_is_split_at_enumerated_midpoint() {
        let ds = step_data();
        let (j, t, sse) = oracle_stump(&ds);
        assert_eq!(sse, 0.0);
        let m = fit_decision_tree(&ds, &TreeSpec { min_samples_leaf: 1, ..TreeSpec::default() }).unwrap();
        let crate::models::ModelParams::Tree(tree) = &m.parameters else { unreachable!() };
        let root = tree.nodes[0].split.unwrap();
        assert_eq!((root.feature, root.threshold), (j, t));
        let pred = m.predict(ds.x()).unwrap();
        assert_eq!(crate::stats::mse(ds.y(), &pred), 0.0);
    }

    #[test]
    fn constant_target_gives_single_leaf() {
        let ds = step_data();
        let flat = TabularDataset::new(
            ds.feature_names().to_vec(),
            ds.x().clone(),
            vec![3.25; 20],
            vec![true; 20],
        )
        .unwrap();
        let m = fit_decision_tree(&flat, &TreeSpec::default()).unwrap();
        let crate::models::ModelParams::Tree(tree) = &m.parameters else { unreachable!() };
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(m.predict_row(&[100.0, -4.0]), 3.25);
    }

    #[test]
    fn empty_training_split_is_an_error() {
        let ds = step_data().with_train_mask(vec![false; 20]).unwrap();
        assert!(matches!(fit_decision_tree(&ds, &TreeSpec::default()), Err(Error::Empty(_))));
    }
}
