//! Explainable boosting machine: bagged cyclic boosting of per-feature shape
//! functions on binned axes, followed by a small set of pairwise terms.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FittedModel, ModelParams, ModelSpec};
use crate::error::{Error, Result};
use crate::ingest::TabularDataset;
use crate::matrix::Matrix;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EbmSpec {
    pub n_interactions: usize,
    pub outer_bags: usize,
    pub inner_bags: usize,
    pub max_bins: usize,
    pub max_interaction_bins: usize,
    pub max_rounds: usize,
    pub early_stop_rounds: usize,
    pub early_stop_tol: f64,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    /// Leaves of each boosted shape update on the binned axis.
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for EbmSpec {
    fn default() -> Self {
        EbmSpec {
            n_interactions: 10,
            outer_bags: 8,
            inner_bags: 0,
            max_bins: 256,
            max_interaction_bins: 32,
            max_rounds: 5000,
            early_stop_rounds: 50,
            early_stop_tol: 1e-4,
            learning_rate: 0.01,
            validation_fraction: 0.15,
            max_leaves: 3,
            min_samples_leaf: 2,
            seed: 0,
        }
    }
}

/// Shape function of one feature: `scores[bin]` with `cuts.len() + 1` bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainTerm {
    pub feature: usize,
    pub cuts: Vec<f64>,
    pub scores: Vec<f64>,
}

/// Pairwise term on a coarse grid, scores stored row-major over
/// `(bins of first) x (bins of second)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTerm {
    pub features: (usize, usize),
    pub cuts: (Vec<f64>, Vec<f64>),
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbmModel {
    pub intercept: f64,
    pub mains: Vec<MainTerm>,
    pub pairs: Vec<PairTerm>,
    /// Rounds run per bag for the main and pair stages.
    pub rounds: Vec<(usize, usize)>,
    pub notes: Vec<String>,
}

/// Bin of `v` given ascending cut points; values equal to a cut fall left.
#[inline]
pub fn bin_of(cuts: &[f64], v: f64) -> usize {
    cuts.partition_point(|&c| c < v)
}

impl MainTerm {
    pub fn score(&self, row: &[f64]) -> f64 {
        self.scores[bin_of(&self.cuts, row[self.feature])]
    }
}

impl PairTerm {
    pub fn n_bins(&self) -> (usize, usize) {
        (self.cuts.0.len() + 1, self.cuts.1.len() + 1)
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        let a = bin_of(&self.cuts.0, row[self.features.0]);
        let b = bin_of(&self.cuts.1, row[self.features.1]);
        self.scores[a * self.n_bins().1 + b]
    }
}

impl EbmModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept
            + self.mains.iter().map(|t| t.score(row)).sum::<f64>()
            + self.pairs.iter().map(|t| t.score(row)).sum::<f64>()
    }

    /// Term-wise average of models sharing the same term layout.
    pub fn average(bags: &[EbmModel]) -> EbmModel {
        let k = bags.len() as f64;
        let mut out = bags[0].clone();
        out.intercept = bags.iter().map(|b| b.intercept).sum::<f64>() / k;
        for (t, term) in out.mains.iter_mut().enumerate() {
            for (s, score) in term.scores.iter_mut().enumerate() {
                *score = bags.iter().map(|b| b.mains[t].scores[s]).sum::<f64>() / k;
            }
        }
        for (t, term) in out.pairs.iter_mut().enumerate() {
            for (s, score) in term.scores.iter_mut().enumerate() {
                *score = bags.iter().map(|b| b.pairs[t].scores[s]).sum::<f64>() / k;
            }
        }
        out.rounds = bags.iter().flat_map(|b| b.rounds.iter().copied()).collect();
        out
    }

    /// Moves the training-weighted mean of each term into the intercept.
    fn center(&mut self, x: &Matrix, rows: &[usize]) {
        let n = rows.len() as f64;
        for term in &mut self.mains {
            let m = rows.iter().map(|&i| term.score(x.row(i))).sum::<f64>() / n;
            term.scores.iter_mut().for_each(|s| *s -= m);
            self.intercept += m;
        }
        for term in &mut self.pairs {
            let m = rows.iter().map(|&i| term.score(x.row(i))).sum::<f64>() / n;
            term.scores.iter_mut().for_each(|s| *s -= m);
            self.intercept += m;
        }
    }
}

/// Cut points for at most `max_bins` bins: midpoints between consecutive
/// distinct values, thinned to quantile positions when there are too many.
pub fn bin_cuts(values: &[f64], max_bins: usize) -> Vec<f64> {
    let sorted = stats::sorted(values);
    let mut uniq = sorted.clone();
    stats::dedup_sorted(&mut uniq);
    if uniq.len() <= 1 {
        return Vec::new();
    }
    if uniq.len() <= max_bins {
        return uniq.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    let n = sorted.len();
    let mut cuts = Vec::with_capacity(max_bins);
    for k in 1..max_bins {
        let pos = (k * n) / max_bins;
        if pos == 0 || pos >= n {
            continue;
        }
        let (a, b) = (sorted[pos - 1], sorted[pos]);
        if a < b {
            cuts.push(0.5 * (a + b));
        }
    }
    stats::dedup_sorted(&mut cuts);
    cuts
}

/// Residual sums and weights per bin.
struct Histogram {
    sum: Vec<f64>,
    weight: Vec<f64>,
}

impl Histogram {
    fn build(n_bins: usize, bins: &[usize], residual: &[f64], rows: &[(usize, f64)]) -> Self {
        let mut sum = vec![0.0; n_bins];
        let mut weight = vec![0.0; n_bins];
        for &(i, w) in rows {
            sum[bins[i]] += w * residual[i];
            weight[bins[i]] += w;
        }
        Histogram { sum, weight }
    }
}

fn range_stats(ps: &[f64], pw: &[f64], a: usize, b: usize) -> (f64, f64) {
    (ps[b] - ps[a], pw[b] - pw[a])
}

/// Best cut inside bins `[a, b)`: returns `(cut, gain)` with left = `[a, cut)`.
fn best_cut(ps: &[f64], pw: &[f64], a: usize, b: usize, min_leaf: f64) -> Option<(usize, f64)> {
    let (s, w) = range_stats(ps, pw, a, b);
    if w <= 0.0 {
        return None;
    }
    let parent = s * s / w;
    let mut best: Option<(usize, f64)> = None;
    for c in a + 1..b {
        let (sl, wl) = range_stats(ps, pw, a, c);
        let (sr, wr) = range_stats(ps, pw, c, b);
        if wl < min_leaf || wr < min_leaf {
            continue;
        }
        let gain = sl * sl / wl + sr * sr / wr - parent;
        if gain > best.map_or(0.0, |(_, g)| g) {
            best = Some((c, gain));
        }
    }
    best
}

/// Greedy piecewise-constant fit with at most `max_leaves` segments over the
/// ordered bins; returns the per-bin update (segment mean residual).
fn fit_shape_update(h: &Histogram, max_leaves: usize, min_leaf: f64) -> Option<Vec<f64>> {
    let n = h.sum.len();
    let mut ps = vec![0.0; n + 1];
    let mut pw = vec![0.0; n + 1];
    for b in 0..n {
        ps[b + 1] = ps[b] + h.sum[b];
        pw[b + 1] = pw[b] + h.weight[b];
    }
    let mut segments = vec![(0usize, n)];
    while segments.len() < max_leaves.max(2) {
        let mut pick: Option<(usize, usize, f64)> = None;
        for (k, &(a, b)) in segments.iter().enumerate() {
            if let Some((c, g)) = best_cut(&ps, &pw, a, b, min_leaf) {
                if pick.is_none_or(|(_, _, pg)| g > pg) {
                    pick = Some((k, c, g));
                }
            }
        }
        let Some((k, c, _)) = pick else { break };
        let (a, b) = segments[k];
        segments[k] = (a, c);
        segments.insert(k + 1, (c, b));
    }
    if segments.len() < 2 {
        return None;
    }
    let mut update = vec![0.0; n];
    for (a, b) in segments {
        let (s, w) = range_stats(&ps, &pw, a, b);
        let v = if w > 0.0 { s / w } else { 0.0 };
        update[a..b].iter_mut().for_each(|u| *u = v);
    }
    Some(update)
}

/// Best four-quadrant split of a 2-D histogram (FAST): returns the gain and
/// the per-cell update.
fn fit_pair_update(
    sum: &[f64],
    weight: &[f64],
    shape: (usize, usize),
) -> Option<(f64, Vec<f64>)> {
    let (na, nb) = shape;
    // 2-D prefix sums with a zero border.
    let idx = |i: usize, j: usize| i * (nb + 1) + j;
    let mut ps = vec![0.0; (na + 1) * (nb + 1)];
    let mut pw = vec![0.0; (na + 1) * (nb + 1)];
    for i in 0..na {
        for j in 0..nb {
            let c = i * nb + j;
            ps[idx(i + 1, j + 1)] = sum[c] + ps[idx(i, j + 1)] + ps[idx(i + 1, j)] - ps[idx(i, j)];
            pw[idx(i + 1, j + 1)] =
                weight[c] + pw[idx(i, j + 1)] + pw[idx(i + 1, j)] - pw[idx(i, j)];
        }
    }
    let rect = |p: &[f64], i0: usize, i1: usize, j0: usize, j1: usize| {
        p[idx(i1, j1)] - p[idx(i0, j1)] - p[idx(i1, j0)] + p[idx(i0, j0)]
    };
    let total_s = rect(&ps, 0, na, 0, nb);
    let total_w = rect(&pw, 0, na, 0, nb);
    if total_w <= 0.0 {
        return None;
    }
    let base = total_s * total_s / total_w;
    let mut best: Option<(usize, usize, f64)> = None;
    for ca in 1..na {
        for cb in 1..nb {
            let mut g = 0.0;
            for (i0, i1, j0, j1) in [(0, ca, 0, cb), (0, ca, cb, nb), (ca, na, 0, cb), (ca, na, cb, nb)] {
                let w = rect(&pw, i0, i1, j0, j1);
                if w > 0.0 {
                    let s = rect(&ps, i0, i1, j0, j1);
                    g += s * s / w;
                }
            }
            let g = g - base;
            if g > best.map_or(0.0, |(_, _, bg)| bg) {
                best = Some((ca, cb, g));
            }
        }
    }
    let (ca, cb, gain) = best?;
    let mut update = vec![0.0; na * nb];
    for (i0, i1, j0, j1) in [(0, ca, 0, cb), (0, ca, cb, nb), (ca, na, 0, cb), (ca, na, cb, nb)] {
        let w = rect(&pw, i0, i1, j0, j1);
        let v = if w > 0.0 { rect(&ps, i0, i1, j0, j1) / w } else { 0.0 };
        for i in i0..i1 {
            for j in j0..j1 {
                update[i * nb + j] = v;
            }
        }
    }
    Some((gain, update))
}

/// Tracks validation loss for early stopping and remembers the best state.
struct Stopper<T> {
    tol: f64,
    patience: usize,
    reference: f64,
    stale: usize,
    best_loss: f64,
    best: Option<T>,
}

impl<T: Clone> Stopper<T> {
    fn new(initial_loss: f64, tol: f64, patience: usize) -> Self {
        Stopper {
            tol,
            patience,
            reference: initial_loss,
            stale: 0,
            best_loss: initial_loss,
            best: None,
        }
    }

    /// Returns true when training should stop.
    fn observe(&mut self, loss: f64, state: &T) -> bool {
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best = Some(state.clone());
        }
        if loss < self.reference * (1.0 - self.tol) {
            self.reference = loss;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.stale >= self.patience
    }
}

fn weighted_mse(residual: &[f64], rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().map(|&i| residual[i] * residual[i]).sum::<f64>() / rows.len() as f64
}

/// Row multiset for one boosting step: the bag rows, or (with inner bags)
/// a bootstrap of them.
fn inner_samples<R: Rng>(fit_rows: &[(usize, f64)], inner_bags: usize, rng: &mut R) -> Vec<Vec<(usize, f64)>> {
    if inner_bags == 0 {
        return vec![fit_rows.to_vec()];
    }
    (0..inner_bags)
        .map(|_| {
            let mut counts = vec![0.0; fit_rows.len()];
            for _ in 0..fit_rows.len() {
                counts[rng.random_range(0..fit_rows.len())] += 1.0;
            }
            fit_rows
                .iter()
                .zip(counts)
                .filter(|(_, c)| *c > 0.0)
                .map(|(&(i, w), c)| (i, w * c))
                .collect()
        })
        .collect()
}

struct BagRows {
    fit: Vec<(usize, f64)>,
    validation: Vec<usize>,
}

/// Outer bag: a seeded re-split of the training rows into a fitting part and
/// an early-stopping holdout.
fn bag_rows(train: &[usize], spec: &EbmSpec, bag: usize) -> BagRows {
    let mut rng = stats::rng(spec.seed.wrapping_add(bag as u64));
    let mut order = train.to_vec();
    order.shuffle(&mut rng);
    let n_val = ((train.len() as f64) * spec.validation_fraction).round() as usize;
    let n_val = n_val.min(train.len().saturating_sub(2));
    let validation = order[..n_val].to_vec();
    let mut fit: Vec<(usize, f64)> = order[n_val..].iter().map(|&i| (i, 1.0)).collect();
    fit.sort_unstable_by_key(|&(i, _)| i);
    BagRows { fit, validation }
}

struct Binned {
    cuts: Vec<Vec<f64>>,
    bins: Vec<Vec<usize>>,
}

impl Binned {
    fn new(x: &Matrix, train: &[usize], max_bins: usize) -> Self {
        let mut cuts = Vec::with_capacity(x.ncols());
        let mut bins = Vec::with_capacity(x.ncols());
        for j in 0..x.ncols() {
            let col: Vec<f64> = train.iter().map(|&i| x.get(i, j)).collect();
            let c = bin_cuts(&col, max_bins);
            bins.push((0..x.nrows()).map(|i| bin_of(&c, x.get(i, j))).collect());
            cuts.push(c);
        }
        Binned { cuts, bins }
    }

    fn n_bins(&self, j: usize) -> usize {
        self.cuts[j].len() + 1
    }
}

/// Boosts the main-effect tables of one bag.
fn boost_mains(
    y: &[f64],
    binned: &Binned,
    rows: &BagRows,
    spec: &EbmSpec,
    bag: usize,
) -> (f64, Vec<Vec<f64>>, usize) {
    let d = binned.cuts.len();
    let total_w: f64 = rows.fit.iter().map(|&(_, w)| w).sum();
    let intercept = rows.fit.iter().map(|&(i, w)| w * y[i]).sum::<f64>() / total_w;
    let mut residual: Vec<f64> = y.iter().map(|v| v - intercept).collect();
    let mut tables: Vec<Vec<f64>> = (0..d).map(|j| vec![0.0; binned.n_bins(j)]).collect();
    let mut rng = stats::rng(stats::task_seed(spec.seed, 1000 + bag as u64));
    let mut stopper = Stopper::new(
        weighted_mse(&residual, &rows.validation),
        spec.early_stop_tol,
        spec.early_stop_rounds,
    );
    let mut rounds = 0;
    for _ in 0..spec.max_rounds {
        rounds += 1;
        for j in 0..d {
            let n_bins = binned.n_bins(j);
            if n_bins < 2 {
                continue;
            }
            let samples = inner_samples(&rows.fit, spec.inner_bags, &mut rng);
            let mut update = vec![0.0; n_bins];
            let mut used = 0;
            for s in &samples {
                let h = Histogram::build(n_bins, &binned.bins[j], &residual, s);
                if let Some(u) = fit_shape_update(&h, spec.max_leaves, spec.min_samples_leaf as f64) {
                    update.iter_mut().zip(u).for_each(|(a, b)| *a += b);
                    used += 1;
                }
            }
            if used == 0 {
                continue;
            }
            let scale = spec.learning_rate / samples.len() as f64;
            for (t, u) in tables[j].iter_mut().zip(&update) {
                *t += scale * u;
            }
            for (r, &b) in residual.iter_mut().zip(&binned.bins[j]) {
                *r -= scale * update[b];
            }
        }
        if rows.validation.is_empty() {
            continue;
        }
        if stopper.observe(weighted_mse(&residual, &rows.validation), &tables) {
            break;
        }
    }
    if let Some(best) = stopper.best {
        tables = best;
    }
    (intercept, tables, rounds)
}

/// FAST ranking: residual variance explained by the best quadrant split on
/// each pair's coarse grid.
fn rank_pairs(residual: &[f64], coarse: &Binned, train: &[usize], k: usize) -> Vec<(usize, usize)> {
    let d = coarse.cuts.len();
    let rows: Vec<(usize, f64)> = train.iter().map(|&i| (i, 1.0)).collect();
    let mut scored = Vec::new();
    for a in 0..d {
        for b in a + 1..d {
            let (na, nb) = (coarse.n_bins(a), coarse.n_bins(b));
            if na < 2 || nb < 2 {
                continue;
            }
            let (sum, weight) = pair_histogram(residual, coarse, (a, b), &rows);
            if let Some((gain, _)) = fit_pair_update(&sum, &weight, (na, nb)) {
                scored.push((gain, a, b));
            }
        }
    }
    scored.sort_by(|p, q| q.0.total_cmp(&p.0).then((p.1, p.2).cmp(&(q.1, q.2))));
    scored.into_iter().take(k).map(|(_, a, b)| (a, b)).collect()
}

fn pair_histogram(
    residual: &[f64],
    coarse: &Binned,
    (a, b): (usize, usize),
    rows: &[(usize, f64)],
) -> (Vec<f64>, Vec<f64>) {
    let nb = coarse.n_bins(b);
    let cells = coarse.n_bins(a) * nb;
    let mut sum = vec![0.0; cells];
    let mut weight = vec![0.0; cells];
    for &(i, w) in rows {
        let c = coarse.bins[a][i] * nb + coarse.bins[b][i];
        sum[c] += w * residual[i];
        weight[c] += w;
    }
    (sum, weight)
}

fn boost_pairs(
    residual: &mut [f64],
    coarse: &Binned,
    pairs: &[(usize, usize)],
    rows: &BagRows,
    spec: &EbmSpec,
    bag: usize,
) -> (Vec<Vec<f64>>, usize) {
    let mut tables: Vec<Vec<f64>> = pairs
        .iter()
        .map(|&(a, b)| vec![0.0; coarse.n_bins(a) * coarse.n_bins(b)])
        .collect();
    if pairs.is_empty() {
        return (tables, 0);
    }
    let mut rng = stats::rng(stats::task_seed(spec.seed, 2000 + bag as u64));
    let mut stopper = Stopper::new(
        weighted_mse(residual, &rows.validation),
        spec.early_stop_tol,
        spec.early_stop_rounds,
    );
    let mut rounds = 0;
    for _ in 0..spec.max_rounds {
        rounds += 1;
        for (t, &(a, b)) in pairs.iter().enumerate() {
            let shape = (coarse.n_bins(a), coarse.n_bins(b));
            let samples = inner_samples(&rows.fit, spec.inner_bags, &mut rng);
            let mut update = vec![0.0; shape.0 * shape.1];
            let mut used = 0;
            for s in &samples {
                let (sum, weight) = pair_histogram(residual, coarse, (a, b), s);
                if let Some((_, u)) = fit_pair_update(&sum, &weight, shape) {
                    update.iter_mut().zip(u).for_each(|(x, y)| *x += y);
                    used += 1;
                }
            }
            if used == 0 {
                continue;
            }
            let scale = spec.learning_rate / samples.len() as f64;
            for (s, u) in tables[t].iter_mut().zip(&update) {
                *s += scale * u;
            }
            for (i, r) in residual.iter_mut().enumerate() {
                *r -= scale * update[coarse.bins[a][i] * shape.1 + coarse.bins[b][i]];
            }
        }
        if rows.validation.is_empty() {
            continue;
        }
        if stopper.observe(weighted_mse(residual, &rows.validation), &tables) {
            break;
        }
    }
    if let Some(best) = stopper.best {
        tables = best;
    }
    (tables, rounds)
}

/// Fits every outer bag and returns the per-bag models (uncentered).
pub(crate) fn fit_bags(ds: &TabularDataset, spec: &EbmSpec) -> Result<Vec<EbmModel>> {
    let train = ds.train_indices();
    if train.is_empty() {
        return Err(Error::Empty("training split".into()));
    }
    if train.len() < 20 {
        return Err(Error::InsufficientData(format!(
            "EBM needs at least 20 training rows, got {}",
            train.len()
        )));
    }
    if spec.outer_bags < 1 || spec.max_interaction_bins > spec.max_bins || spec.max_bins < 2 {
        return Err(Error::InvalidArgument(
            "EBM needs outer_bags >= 1 and 2 <= max_interaction_bins <= max_bins".into(),
        ));
    }
    let x = ds.x();
    let y = ds.y();
    let d = ds.n_features();
    let binned = Binned::new(x, &train, spec.max_bins);
    let coarse = Binned::new(x, &train, spec.max_interaction_bins);
    let bag_rows: Vec<BagRows> = (0..spec.outer_bags).map(|b| bag_rows(&train, spec, b)).collect();

    let mains: Vec<(f64, Vec<Vec<f64>>, usize)> = bag_rows
        .iter()
        .enumerate()
        .map(|(b, r)| boost_mains(y, &binned, r, spec, b))
        .collect();

    let mut notes = Vec::new();
    let pairs = if spec.n_interactions == 0 {
        Vec::new()
    } else if d < 2 {
        notes.push("fewer than two features: interaction terms skipped".to_string());
        Vec::new()
    } else {
        let k = mains.len() as f64;
        let residual: Vec<f64> = (0..ds.n_rows())
            .map(|i| {
                let fit: f64 = mains
                    .iter()
                    .map(|(c, t, _)| c + (0..d).map(|j| t[j][binned.bins[j][i]]).sum::<f64>())
                    .sum::<f64>()
                    / k;
                y[i] - fit
            })
            .collect();
        rank_pairs(&residual, &coarse, &train, spec.n_interactions)
    };

    let mut bags = Vec::with_capacity(spec.outer_bags);
    for (b, (rows, (intercept, tables, main_rounds))) in bag_rows.iter().zip(mains).enumerate() {
        let mut residual: Vec<f64> = (0..ds.n_rows())
            .map(|i| y[i] - intercept - (0..d).map(|j| tables[j][binned.bins[j][i]]).sum::<f64>())
            .collect();
        let (pair_tables, pair_rounds) = boost_pairs(&mut residual, &coarse, &pairs, rows, spec, b);
        bags.push(EbmModel {
            intercept,
            mains: tables
                .into_iter()
                .enumerate()
                .map(|(j, scores)| MainTerm {
                    feature: j,
                    cuts: binned.cuts[j].clone(),
                    scores,
                })
                .collect(),
            pairs: pairs
                .iter()
                .zip(pair_tables)
                .map(|(&(a, c), scores)| PairTerm {
                    features: (a, c),
                    cuts: (coarse.cuts[a].clone(), coarse.cuts[c].clone()),
                    scores,
                })
                .collect(),
            rounds: vec![(main_rounds, pair_rounds)],
            notes: notes.clone(),
        });
    }
    Ok(bags)
}

pub fn fit_ebm(ds: &TabularDataset, spec: &EbmSpec) -> Result<FittedModel> {
    let bags = fit_bags(ds, spec)?;
    let mut model = EbmModel::average(&bags);
    model.center(ds.x(), &ds.train_indices());
    Ok(FittedModel::new(
        ModelSpec::Ebm(spec.clone()),
        ds.feature_names().to_vec(),
        ModelParams::Ebm(model),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Predictor;

    fn additive(n: usize, seed: u64) -> TabularDataset {
        let mut rng = stats::rng(seed);
        let mut cols = vec![Vec::new(), Vec::new(), Vec::new()];
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = (rng.random_range(0..10) as f64) / 9.0;
            let b: f64 = (rng.random_range(0..10) as f64) / 9.0;
            let c: f64 = (rng.random_range(0..10) as f64) / 9.0;
            y.push(2.0 * a + (3.0 * b).sin() + if c > 0.5 { 0.5 } else { 0.0 });
            cols[0].push(a);
            cols[1].push(b);
            cols[2].push(c);
        }
        let x = Matrix::from_columns(&cols).unwrap();
        TabularDataset::new(vec!["a".into(), "b".into(), "c".into()], x, y, vec![true; n]).unwrap()
    }

    #[test]
    fn cut_points_are_midpoints_or_quantiles() {
        assert_eq!(bin_cuts(&[3.0, 1.0, 2.0, 2.0], 256), vec![1.5, 2.5]);
        assert!(bin_cuts(&[4.0; 5], 256).is_empty());
        let many: Vec<f64> = (0..1000).map(f64::from).collect();
        let c = bin_cuts(&many, 32);
        assert_eq!(c.len(), 31);
        assert_eq!(bin_of(&c, -1.0), 0);
        assert_eq!(bin_of(&c, 2000.0), 31);
    }

    #[test]
    fn additive_target_leaves_pairs_small() {
        let ds = additive(400, 7);
        let m = fit_ebm(&ds, &EbmSpec { n_interactions: 3, outer_bags: 2, ..EbmSpec::default() }).unwrap();
        let ebm = m.as_ebm().unwrap();
        let sd = stats::std_dev(ds.y());
        assert_eq!(ebm.pairs.len(), 3);
        for p in &ebm.pairs {
            let max = p.scores.iter().fold(0.0f64, |a, s| a.max(s.abs()));
            assert!(max < 0.05 * sd, "pair {:?} max {max} vs sd {sd}", p.features);
        }
    }

    #[test]
    fn linear_feature_gets_increasing_shape() {
        let n = 200;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let y: Vec<f64> = xs.iter().map(|v| 2.0 * v).collect();
        let x = Matrix::from_columns(&[xs]).unwrap();
        let ds = TabularDataset::new(vec!["x1".into()], x, y, vec![true; n]).unwrap();
        let m = fit_ebm(&ds, &EbmSpec { outer_bags: 2, ..EbmSpec::default() }).unwrap();
        let ebm = m.as_ebm().unwrap();
        assert!(ebm.pairs.is_empty());
        assert!(!ebm.notes.is_empty());
        let s = &ebm.mains[0].scores;
        let first = s[0];
        let last = s[s.len() - 1];
        assert!(last - first > 1.5, "range {first}..{last}");
        assert!(s.windows(2).all(|w| w[1] >= w[0] - 1e-12), "not monotone");
    }

    #[test]
    fn averaged_tables_predict_the_bag_mean() {
        let ds = additive(150, 3);
        let spec = EbmSpec { n_interactions: 2, outer_bags: 3, max_rounds: 200, ..EbmSpec::default() };
        let bags = fit_bags(&ds, &spec).unwrap();
        let avg = EbmModel::average(&bags);
        for row in ds.x().row_iter().take(30) {
            let mean = bags.iter().map(|b| b.predict_row(row)).sum::<f64>() / bags.len() as f64;
            assert!((avg.predict_row(row) - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn prediction_is_intercept_plus_lookups() {
        let ds = additive(120, 5);
        let m = fit_ebm(&ds, &EbmSpec { outer_bags: 2, max_rounds: 300, ..EbmSpec::default() }).unwrap();
        let ebm = m.as_ebm().unwrap();
        for row in ds.x().row_iter().take(20) {
            let mut total = ebm.intercept;
            for t in &ebm.mains {
                total += t.scores[bin_of(&t.cuts, row[t.feature])];
            }
            for p in &ebm.pairs {
                let (_, nb) = p.n_bins();
                total += p.scores[bin_of(&p.cuts.0, row[p.features.0]) * nb + bin_of(&p.cuts.1, row[p.features.1])];
            }
            assert!((total - m.predict_row(row)).abs() < 1e-12);
        }
    }
}
