//! Model-agnostic explainers: permutation importance, partial dependence,
//! accumulated local effects, LIME and exact interventional Shapley values.
//!
//! Every explainer works through [`Predictor`], so it applies equally to
//! fitted models and to ad-hoc closures wrapped in a predictor type.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand_distr::StandardNormal;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::feature_select::{FeatureScoreTable, ScoreMethod};
use crate::ingest::TabularDataset;
use crate::matrix::Matrix;
use crate::models::Predictor;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionMethod {
    Lime,
    Shapley,
    Intrinsic,
}

impl AttributionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            AttributionMethod::Lime => "lime",
            AttributionMethod::Shapley => "shapley",
            AttributionMethod::Intrinsic => "intrinsic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureValue {
    pub name: String,
    pub value: f64,
}

/// Per-feature credit for one prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub method: AttributionMethod,
    pub sample_index: usize,
    pub base_value: f64,
    pub features: Vec<FeatureValue>,
    #[serde(default)]
    pub metadata: BTreeMap<String, Value>,
}

impl Attribution {
    pub fn value_of(&self, name: &str) -> Option<f64> {
        self.features.iter().find(|f| f.name == name).map(|f| f.value)
    }

    pub fn total(&self) -> f64 {
        self.base_value + self.features.iter().map(|f| f.value).sum::<f64>()
    }

    /// Feature with the largest |value| (first one on ties).
    pub fn dominant(&self) -> Option<&FeatureValue> {
        self.features
            .iter()
            .fold(None, |best: Option<&FeatureValue>, f| match best {
                Some(b) if b.value.abs() >= f.value.abs() => Some(b),
                _ => Some(f),
            })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,value\n");
        out.push_str(&format!("(base),{}\n", self.base_value));
        for f in &self.features {
            out.push_str(&format!("{},{}\n", f.name, f.value));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Pdp,
    Ale,
    Shape,
    Robustness,
    Resilience,
}

/// A one-dimensional curve on an ascending grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    pub feature: String,
    pub kind: CurveKind,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default)]
    pub metadata: BTreeMap<String, Value>,
}

impl CurveSeries {
    pub fn new(feature: impl Into<String>, kind: CurveKind, grid: Vec<f64>, values: Vec<f64>) -> Self {
        CurveSeries {
            feature: feature.into(),
            kind,
            grid,
            values,
            metadata: BTreeMap::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("grid,value\n");
        for (g, v) in self.grid.iter().zip(&self.values) {
            out.push_str(&format!("{g},{v}\n"));
        }
        out
    }
}

/// Mean increase of test MSE when one column is shuffled; negative values
/// are kept.
pub fn permutation_importance(
    model: &dyn Predictor,
    ds: &TabularDataset,
    repeats: usize,
    seed: u64,
) -> Result<FeatureScoreTable> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    if ds.n_test() == 0 {
        return Err(Error::Empty("test split".into()));
    }
    let x = ds.test_x();
    let y = ds.test_y();
    let baseline = stats::mse(&y, &model.predict(&x)?);
    let mut scores = Vec::with_capacity(ds.n_features());
    for (j, name) in ds.feature_names().iter().enumerate() {
        let column = x.column(j);
        let mut total = 0.0;
        for r in 0..repeats {
            // Seeded by name so results do not depend on column order.
            let mut rng = stats::rng(stats::task_seed(seed ^ stats::fnv1a(name.as_bytes()), r as u64));
            let mut shuffled = column.clone();
            shuffled.shuffle(&mut rng);
            let mut xp = x.clone();
            for (i, v) in shuffled.into_iter().enumerate() {
                xp.set(i, j, v);
            }
            total += stats::mse(&y, &model.predict(&xp)?) - baseline;
        }
        scores.push(total / repeats as f64);
    }
    let mut t = FeatureScoreTable::new(ScoreMethod::Permutation, ds.feature_names().to_vec(), scores);
    t.metadata.insert("metric".into(), "mse".into());
    t.metadata.insert("baseline".into(), baseline.into());
    t.metadata.insert("repeats".into(), repeats.into());
    t.metadata.insert("split".into(), "test".into());
    Ok(t)
}

fn mean_with_column(model: &dyn Predictor, x: &Matrix, j: usize, value: f64) -> Result<f64> {
    let mut xp = x.clone();
    for i in 0..xp.nrows() {
        xp.set(i, j, value);
    }
    Ok(stats::mean(&model.predict(&xp)?))
}

/// Partial dependence over `grid_size` equally spaced points of the training
/// range, or over the sorted distinct training values when there are fewer.
pub fn partial_dependence(
    model: &dyn Predictor,
    ds: &TabularDataset,
    feature: &str,
    grid_size: usize,
) -> Result<CurveSeries> {
    let j = ds.feature_index(feature)?;
    if grid_size < 2 {
        return Err(Error::InvalidArgument("grid_size must be at least 2".into()));
    }
    if ds.n_train() == 0 {
        return Err(Error::Empty("training split".into()));
    }
    let col = ds.train_column(j);
    let mut uniq = stats::sorted(&col);
    stats::dedup_sorted(&mut uniq);
    let grid = if uniq.len() < grid_size {
        uniq
    } else {
        let (lo, hi) = (uniq[0], uniq[uniq.len() - 1]);
        (0..grid_size)
            .map(|k| {
                if k == grid_size - 1 {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (grid_size - 1) as f64
                }
            })
            .collect()
    };
    let x = ds.train_x();
    let values = grid
        .iter()
        .map(|&g| mean_with_column(model, &x, j, g))
        .collect::<Result<Vec<_>>>()?;
    Ok(CurveSeries::new(feature, CurveKind::Pdp, grid, values))
}

/// Accumulated local effects on nearest-rank quantile bins of the training
/// column. Values sit on the bin edges and are centred so that the
/// count-weighted mean of the bin midpoint values is zero.
pub fn accumulated_local_effects(
    model: &dyn Predictor,
    ds: &TabularDataset,
    feature: &str,
    num_bins: usize,
) -> Result<CurveSeries> {
    let j = ds.feature_index(feature)?;
    if num_bins == 0 {
        return Err(Error::InvalidArgument("num_bins must be at least 1".into()));
    }
    let col = ds.train_column(j);
    if col.is_empty() || stats::is_constant(&col) {
        return Err(Error::ConstantFeature(feature.to_string()));
    }
    let mut edges = stats::rank_quantiles(&stats::sorted(&col), num_bins);
    stats::dedup_sorted(&mut edges);
    let k = edges.len() - 1;
    let x = ds.train_x();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &v) in col.iter().enumerate() {
        let b = edges.partition_point(|&e| e < v).clamp(1, k);
        members[b - 1].push(i);
    }
    let mut acc = vec![0.0; k + 1];
    let mut counts = Vec::with_capacity(k);
    for b in 0..k {
        let rows = &members[b];
        counts.push(rows.len());
        let effect = if rows.is_empty() {
            0.0
        } else {
            let sub = x.select_rows(rows);
            mean_with_column(model, &sub, j, edges[b + 1])? - mean_with_column(model, &sub, j, edges[b])?
        };
        acc[b + 1] = acc[b] + effect;
    }
    let n = col.len() as f64;
    let center: f64 = (0..k)
        .map(|b| counts[b] as f64 * 0.5 * (acc[b] + acc[b + 1]))
        .sum::<f64>()
        / n;
    let values = acc.iter().map(|v| v - center).collect();
    let mut c = CurveSeries::new(feature, CurveKind::Ale, edges, values);
    c.metadata.insert("bin_counts".into(), counts.into());
    c.metadata.insert("num_bins".into(), num_bins.into());
    Ok(c)
}

/// Data-weighted mean of an ALE curve (zero by construction).
pub fn ale_weighted_mean(curve: &CurveSeries) -> Option<f64> {
    let counts: Vec<f64> = curve
        .metadata
        .get("bin_counts")?
        .as_array()?
        .iter()
        .map(|v| v.as_f64().unwrap_or(0.0))
        .collect();
    let n: f64 = counts.iter().sum();
    let v = &curve.values;
    Some(
        counts
            .iter()
            .enumerate()
            .map(|(b, c)| c * 0.5 * (v[b] + v[b + 1]))
            .sum::<f64>()
            / n,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimeConfig {
    pub num_samples: usize,
    /// Kernel width in standardized units; `None` means `0.75 * sqrt(d)`.
    pub kernel_width: Option<f64>,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            num_samples: 1000,
            kernel_width: None,
            top_k: 10,
            seed: 0,
        }
    }
}

fn check_sample(ds: &TabularDataset, sample_index: usize) -> Result<()> {
    if sample_index >= ds.n_rows() {
        return Err(Error::InvalidArgument(format!(
            "sample {sample_index} out of range (dataset has {} rows)",
            ds.n_rows()
        )));
    }
    Ok(())
}

/// Weighted linear surrogate around one row. Coefficients are per unit of the
/// feature; the intercept is the surrogate's value at the explained row.
pub fn lime_explain(
    model: &dyn Predictor,
    ds: &TabularDataset,
    sample_index: usize,
    cfg: &LimeConfig,
) -> Result<Attribution> {
    check_sample(ds, sample_index)?;
    let d = ds.n_features();
    if cfg.num_samples < d + 2 {
        return Err(Error::InvalidArgument(format!(
            "num_samples must be at least d + 2 = {}",
            d + 2
        )));
    }
    let kw = cfg.kernel_width.unwrap_or(0.75 * (d as f64).sqrt());
    if !(kw > 0.0 && kw.is_finite()) {
        return Err(Error::InvalidArgument("kernel_width must be positive".into()));
    }
    let x0 = ds.x().row(sample_index).to_vec();
    let std = ds.train_std();
    let active: Vec<usize> = (0..d).filter(|&j| std[j] > 0.0).collect();
    let mut rng = stats::rng(cfg.seed);
    let m = cfg.num_samples;
    let mut offsets = vec![vec![0.0; active.len()]; m];
    let mut samples = Matrix::zeros(m, d);
    for (s, off) in offsets.iter_mut().enumerate() {
        samples.row_mut(s).copy_from_slice(&x0);
        for (a, &j) in active.iter().enumerate() {
            let e: f64 = rng.sample(StandardNormal);
            off[a] = e;
            samples.set(s, j, x0[j] + std[j] * e);
        }
    }
    let preds = model.predict(&samples)?;
    let weights: Vec<f64> = offsets
        .iter()
        .map(|o| (-o.iter().map(|e| e * e).sum::<f64>() / (kw * kw)).exp())
        .collect();
    let total_w: f64 = weights.iter().sum();
    if !(total_w > 1e-12) {
        return Err(Error::SingularDesign(format!(
            "all kernel weights vanish; increase kernel_width (now {kw})"
        )));
    }
    let p = active.len() + 1;
    let design = DMatrix::from_fn(m, p, |s, c| if c == 0 { 1.0 } else { offsets[s][c - 1] });
    let w = DVector::from_vec(weights);
    let mut xtwx = DMatrix::zeros(p, p);
    let mut xtwy = DVector::zeros(p);
    for s in 0..m {
        let row = design.row(s);
        xtwx += w[s] * row.transpose() * row;
        xtwy += w[s] * preds[s] * row.transpose();
    }
    let solution = xtwx
        .clone()
        .cholesky()
        .map(|c| c.solve(&xtwy))
        .ok_or_else(|| {
            Error::SingularDesign(format!("weighted design is rank deficient; increase kernel_width (now {kw})"))
        })?;
    let mut coef = vec![0.0; d];
    for (a, &j) in active.iter().enumerate() {
        coef[j] = solution[a + 1] / std[j];
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| coef[b].abs().total_cmp(&coef[a].abs()).then(a.cmp(&b)));
    let features = order
        .into_iter()
        .take(cfg.top_k.max(1))
        .map(|j| FeatureValue {
            name: ds.feature_names()[j].clone(),
            value: coef[j],
        })
        .collect();
    let mut metadata = BTreeMap::new();
    metadata.insert("kernel_width".into(), kw.into());
    metadata.insert("num_samples".into(), m.into());
    metadata.insert("seed".into(), cfg.seed.into());
    metadata.insert("perturbation".into(), "gaussian, training std per feature".into());
    metadata.insert("effective_weight".into(), total_w.into());
    Ok(Attribution {
        method: AttributionMethod::Lime,
        sample_index,
        base_value: solution[0],
        features,
        metadata,
    })
}

pub const DEFAULT_MAX_SHAPLEY_FEATURES: usize = 15;
pub const DEFAULT_BACKGROUND_SIZE: usize = 100;

/// Up to `size` training rows sampled without replacement, in row order.
pub fn default_background(ds: &TabularDataset, size: usize, seed: u64) -> Matrix {
    let train = ds.train_indices();
    let rows: Vec<usize> = if train.len() <= size {
        train
    } else {
        let mut rng = stats::rng(seed);
        let mut pick: Vec<usize> = sample(&mut rng, train.len(), size)
            .into_iter()
            .map(|k| train[k])
            .collect();
        pick.sort_unstable();
        pick
    };
    ds.x().select_rows(&rows)
}

/// Exact interventional Shapley values of one row by enumerating all feature
/// subsets against `background`.
pub fn shapley_exact(
    model: &dyn Predictor,
    ds: &TabularDataset,
    sample_index: usize,
    background: &Matrix,
    max_features: usize,
) -> Result<Attribution> {
    check_sample(ds, sample_index)?;
    let x = ds.x().row(sample_index).to_vec();
    let values = shapley_values(model, &x, background, max_features)?;
    let features = ds
        .feature_names()
        .iter()
        .zip(&values.phi)
        .map(|(n, &v)| FeatureValue { name: n.clone(), value: v })
        .collect();
    let mut metadata = BTreeMap::new();
    metadata.insert("background_size".into(), background.nrows().into());
    metadata.insert("prediction".into(), values.prediction.into());
    metadata.insert("subsets".into(), (1u64 << x.len()).into());
    Ok(Attribution {
        method: AttributionMethod::Shapley,
        sample_index,
        base_value: values.base,
        features,
        metadata,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyValues {
    pub base: f64,
    pub phi: Vec<f64>,
    pub prediction: f64,
}

/// Shapley values of `x` for any predictor; see [`shapley_exact`].
pub fn shapley_values(
    model: &dyn Predictor,
    x: &[f64],
    background: &Matrix,
    max_features: usize,
) -> Result<ShapleyValues> {
    let d = x.len();
    if d != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            found: d,
        });
    }
    if d > max_features {
        return Err(Error::TooManyFeatures { d, max: max_features });
    }
    if background.nrows() == 0 {
        return Err(Error::Empty("Shapley background".into()));
    }
    if background.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: background.ncols(),
        });
    }
    let subsets = 1usize << d;
    let mut v = vec![0.0; subsets];
    let mut row = vec![0.0; d];
    for (mask, slot) in v.iter_mut().enumerate() {
        let mut total = 0.0;
        for b in background.row_iter() {
            for j in 0..d {
                row[j] = if mask >> j & 1 == 1 { x[j] } else { b[j] };
            }
            total += model.predict_row(&row);
        }
        *slot = total / background.nrows() as f64;
    }
    // weight[s] = s! (d - s - 1)! / d!
    let mut weight = vec![0.0; d.max(1)];
    for (s, w) in weight.iter_mut().enumerate().take(d) {
        let mut binom = 1.0;
        for k in 0..s {
            binom = binom * (d - 1 - k) as f64 / (k + 1) as f64;
        }
        *w = 1.0 / (d as f64 * binom);
    }
    let mut phi = vec![0.0; d];
    for mask in 0..subsets {
        let size = mask.count_ones() as usize;
        for (j, p) in phi.iter_mut().enumerate() {
            if mask >> j & 1 == 0 {
                *p += weight[size] * (v[mask | 1 << j] - v[mask]);
            }
        }
    }
    Ok(ShapleyValues {
        base: v[0],
        phi,
        prediction: v[subsets - 1],
    })
}
