//! Binary regression trees shared by CART, FIGS and the boosted importance
//! ranker.

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

/// Split gains at or below this fraction of the node's SSE count as zero.
const RELATIVE_GAIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeSplit {
    pub feature: usize,
    /// Rows with `x[feature] <= threshold` go left.
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    /// Training SSE reduction achieved by the split.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub value: f64,
    pub n_samples: usize,
    /// Training SSE of the node's rows about `value` when it was created.
    pub sse: f64,
    pub depth: usize,
    pub split: Option<NodeSplit>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

/// A tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn leaf(value: f64, n_samples: usize, sse: f64) -> Self {
        RegressionTree {
            nodes: vec![TreeNode {
                value,
                n_samples,
                sse,
                depth: 0,
                split: None,
            }],
        }
    }

    /// Index of the leaf reached by `row`.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        while let Some(s) = self.nodes[i].split {
            i = if row[s.feature] <= s.threshold {
                s.left
            } else {
                s.right
            };
        }
        i
    }

    /// Node indices visited by `row`, root first.
    pub fn decision_path(&self, row: &[f64]) -> Vec<usize> {
        let mut path = vec![0];
        let mut i = 0;
        while let Some(s) = self.nodes[i].split {
            i = if row[s.feature] <= s.threshold {
                s.left
            } else {
                s.right
            };
            path.push(i);
        }
        path
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.nodes[self.leaf_index(row)].value
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&i| self.nodes[i].is_leaf())
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.iter().filter(|n| !n.is_leaf()).count()
    }

    pub fn max_depth(&self) -> usize {
        self.leaves().map(|i| self.nodes[i].depth).max().unwrap_or(0)
    }

    /// Replaces leaf `leaf` by a split with two fresh leaves.
    pub(crate) fn split_leaf(&mut self, leaf: usize, cand: &SplitCandidate) {
        let depth = self.nodes[leaf].depth + 1;
        let left = self.nodes.len();
        self.nodes.push(TreeNode {
            value: cand.left_mean,
            n_samples: cand.left.len(),
            sse: cand.left_sse,
            depth,
            split: None,
        });
        self.nodes.push(TreeNode {
            value: cand.right_mean,
            n_samples: cand.right.len(),
            sse: cand.right_sse,
            depth,
            split: None,
        });
        self.nodes[leaf].split = Some(NodeSplit {
            feature: cand.feature,
            threshold: cand.threshold,
            left,
            right: left + 1,
            gain: cand.gain,
        });
    }

    /// Sets every internal node's value to the sample-weighted mean of its
    /// children, bottom-up. Leaves keep their values.
    pub(crate) fn refresh_internal_values(&mut self) {
        fn visit(nodes: &mut [TreeNode], i: usize) -> (f64, usize) {
            match nodes[i].split {
                None => (nodes[i].value * nodes[i].n_samples as f64, nodes[i].n_samples),
                Some(s) => {
                    let (a, na) = visit(nodes, s.left);
                    let (b, nb) = visit(nodes, s.right);
                    let n = na + nb;
                    if n > 0 {
                        nodes[i].value = (a + b) / n as f64;
                    }
                    nodes[i].n_samples = n;
                    (a + b, n)
                }
            }
        }
        visit(&mut self.nodes, 0);
    }

    /// Minimal cost-complexity pruning: collapses every subtree whose SSE
    /// saving does not pay `alpha` per extra leaf. Costs are SSE / `n_total`.
    pub fn prune(&mut self, alpha: f64, n_total: usize) {
        if alpha <= 0.0 {
            return;
        }
        fn best(nodes: &mut [TreeNode], i: usize, alpha: f64, n: f64) -> f64 {
            let as_leaf = nodes[i].sse / n + alpha;
            match nodes[i].split {
                None => as_leaf,
                Some(s) => {
                    let sub = best(nodes, s.left, alpha, n) + best(nodes, s.right, alpha, n);
                    if as_leaf <= sub {
                        nodes[i].split = None;
                        as_leaf
                    } else {
                        sub
                    }
                }
            }
        }
        best(&mut self.nodes, 0, alpha, n_total.max(1) as f64);
        self.compact();
    }

    /// Drops nodes no longer reachable from the root.
    fn compact(&mut self) {
        let mut out: Vec<TreeNode> = Vec::new();
        let mut stack = vec![(0usize, None::<(usize, bool)>)];
        while let Some((old, parent)) = stack.pop() {
            let new = out.len();
            out.push(self.nodes[old].clone());
            if let Some((p, is_left)) = parent {
                if let Some(s) = out[p].split.as_mut() {
                    if is_left {
                        s.left = new;
                    } else {
                        s.right = new;
                    }
                }
            }
            if let Some(s) = self.nodes[old].split {
                stack.push((s.right, Some((new, false))));
                stack.push((s.left, Some((new, true))));
            }
        }
        self.nodes = out;
    }
}

/// Best split of `rows` on `target`, with children holding at least
/// `min_leaf` rows each.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub left_mean: f64,
    pub right_mean: f64,
    pub left_sse: f64,
    pub right_sse: f64,
}

/// Mean and SSE of `target` over `rows`.
pub(crate) fn node_stats(target: &[f64], rows: &[usize]) -> (f64, f64) {
    if rows.is_empty() {
        return (0.0, 0.0);
    }
    let mean = rows.iter().map(|&i| target[i]).sum::<f64>() / rows.len() as f64;
    let sse = rows
        .iter()
        .map(|&i| (target[i] - mean) * (target[i] - mean))
        .sum();
    (mean, sse)
}

/// Exhaustive variance-reduction split search. Candidate thresholds are the
/// midpoints of consecutive distinct values; ties go to the lowest feature,
/// then the lowest threshold.
pub(crate) fn best_split(
    x: &Matrix,
    target: &[f64],
    rows: &[usize],
    min_leaf: usize,
) -> Option<SplitCandidate> {
    let n = rows.len();
    let min_leaf = min_leaf.max(1);
    if n < 2 * min_leaf {
        return None;
    }
    let (mean, sse) = node_stats(target, rows);
    if sse <= 0.0 {
        return None;
    }
    let total: f64 = rows.iter().map(|&i| target[i] - mean).sum();
    let mut best: Option<(usize, usize, f64, f64)> = None;
    let mut order = rows.to_vec();
    for j in 0..x.ncols() {
        order.sort_by(|&a, &b| x.get(a, j).total_cmp(&x.get(b, j)).then(a.cmp(&b)));
        let mut left_sum = 0.0;
        for k in 0..n - 1 {
            left_sum += target[order[k]] - mean;
            let nl = k + 1;
            let nr = n - nl;
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let a = x.get(order[k], j);
            let b = x.get(order[k + 1], j);
            if a == b {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64
                - total * total / n as f64;
            let better = match &best {
                None => true,
                Some((_, _, g, _)) => gain > *g,
            };
            if better {
                let mut t = 0.5 * (a + b);
                if t >= b {
                    t = a;
                }
                best = Some((j, nl, gain, t));
            }
        }
    }
    let (feature, nl, gain, threshold) = best?;
    if !(gain > RELATIVE_GAIN_TOL * sse) {
        return None;
    }
    order.sort_by(|&a, &b| {
        x.get(a, feature)
            .total_cmp(&x.get(b, feature))
            .then(a.cmp(&b))
    });
    let mut left = order[..nl].to_vec();
    let mut right = order[nl..].to_vec();
    left.sort_unstable();
    right.sort_unstable();
    let (left_mean, left_sse) = node_stats(target, &left);
    let (right_mean, right_sse) = node_stats(target, &right);
    Some(SplitCandidate {
        feature,
        threshold,
        gain,
        left,
        right,
        left_mean,
        right_mean,
        left_sse,
        right_sse,
    })
}

/// Greedy depth-first CART growth on `rows`.
pub(crate) fn grow(
    x: &Matrix,
    target: &[f64],
    rows: &[usize],
    max_depth: usize,
    min_leaf: usize,
) -> RegressionTree {
    let (mean, sse) = node_stats(target, rows);
    let mut tree = RegressionTree::leaf(mean, rows.len(), sse);
    let mut stack = vec![(0usize, rows.to_vec())];
    while let Some((node, node_rows)) = stack.pop() {
        if tree.nodes[node].depth >= max_depth {
            continue;
        }
        if let Some(cand) = best_split(x, target, &node_rows, min_leaf) {
            tree.split_leaf(node, &cand);
            let s = tree.nodes[node].split.expect("just split");
            stack.push((s.right, cand.right));
            stack.push((s.left, cand.left));
        }
    }
    tree
}
