//! Model diagnostics: accuracy, residuals, overfit slices, split-conformal
//! reliability, covariate-noise robustness and worst-subsample resilience.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::explain::{CurveKind, CurveSeries};
use crate::ingest::TabularDataset;
use crate::models::{fit, FittedModel, Predictor};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRecord {
    pub split: Split,
    pub mse: f64,
    pub mae: f64,
    /// `None` when the split's target has zero variance.
    pub r2: Option<f64>,
}

/// Test minus train, per metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub mse: f64,
    pub mae: f64,
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub train: AccuracyRecord,
    pub test: AccuracyRecord,
    pub gap: GapRecord,
}

fn record(model: &dyn Predictor, ds: &TabularDataset, split: Split) -> Result<AccuracyRecord> {
    let (x, y) = match split {
        Split::Train => (ds.train_x(), ds.train_y()),
        Split::Test => (ds.test_x(), ds.test_y()),
    };
    if y.is_empty() {
        return Err(Error::Empty(format!("{} split", split.as_str())));
    }
    let p = model.predict(&x)?;
    Ok(AccuracyRecord {
        split,
        mse: stats::mse(&y, &p),
        mae: stats::mae(&y, &p),
        r2: stats::r2(&y, &p),
    })
}

pub fn accuracy_report(model: &dyn Predictor, ds: &TabularDataset) -> Result<AccuracyReport> {
    let train = record(model, ds, Split::Train)?;
    let test = record(model, ds, Split::Test)?;
    let gap = GapRecord {
        mse: test.mse - train.mse,
        mae: test.mae - train.mae,
        r2: test.r2.zip(train.r2).map(|(a, b)| a - b),
    };
    Ok(AccuracyReport { train, test, gap })
}

/// `(prediction, residual)` per split, in row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualPairs {
    pub train: Vec<(f64, f64)>,
    pub test: Vec<(f64, f64)>,
}

impl ResidualPairs {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("prediction,residual,split\n");
        for (rows, name) in [(&self.train, "train"), (&self.test, "test")] {
            for (p, r) in rows {
                out.push_str(&format!("{p},{r},{name}\n"));
            }
        }
        out
    }
}

pub fn residual_pairs(model: &dyn Predictor, ds: &TabularDataset) -> Result<ResidualPairs> {
    let pairs = |x, y: Vec<f64>| -> Result<Vec<(f64, f64)>> {
        let p = model.predict(&x)?;
        Ok(p.into_iter().zip(y).map(|(p, y)| (p, y - p)).collect())
    };
    Ok(ResidualPairs {
        train: pairs(ds.train_x(), ds.train_y())?,
        test: pairs(ds.test_x(), ds.test_y())?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverfitBin {
    pub lower: f64,
    pub upper: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub train_mse: Option<f64>,
    pub test_mse: Option<f64>,
    pub gap: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverfitReport {
    pub feature: String,
    pub flag_factor: f64,
    pub global_test_mse: f64,
    pub bins: Vec<OverfitBin>,
}

/// Bin of `v` for ascending `edges` (first bin closed on the left, values
/// outside the range go to the end bins).
fn edge_bin(edges: &[f64], v: f64) -> usize {
    let k = edges.len() - 1;
    edges.partition_point(|&e| e < v).clamp(1, k) - 1
}

/// Train/test MSE per equal-frequency bin of one feature; a bin is flagged
/// when its test MSE exceeds `flag_factor` times the global test MSE.
pub fn overfit_slices(
    model: &dyn Predictor,
    ds: &TabularDataset,
    feature: &str,
    num_bins: usize,
    flag_factor: f64,
) -> Result<OverfitReport> {
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
    let x = ds.x();
    let y = ds.y();
    let pred = model.predict(x)?;
    let sq: Vec<f64> = (0..ds.n_rows()).map(|i| (y[i] - pred[i]).powi(2)).collect();
    let test = ds.test_indices();
    if test.is_empty() {
        return Err(Error::Empty("test split".into()));
    }
    let global = test.iter().map(|&i| sq[i]).sum::<f64>() / test.len() as f64;
    let mut acc = vec![[0.0f64; 4]; k];
    for (i, &is_train) in ds.train_mask().iter().enumerate() {
        let b = edge_bin(&edges, x.get(i, j));
        let slot = if is_train { 0 } else { 2 };
        acc[b][slot] += sq[i];
        acc[b][slot + 1] += 1.0;
    }
    let bins = (0..k)
        .map(|b| {
            let [st, nt, se, ne] = acc[b];
            let train_mse = (nt > 0.0).then(|| st / nt);
            let test_mse = (ne > 0.0).then(|| se / ne);
            OverfitBin {
                lower: edges[b],
                upper: edges[b + 1],
                n_train: nt as usize,
                n_test: ne as usize,
                train_mse,
                test_mse,
                gap: test_mse.zip(train_mse).map(|(a, b)| a - b),
                flagged: test_mse.is_some_and(|m| m > flag_factor * global),
            }
        })
        .collect();
    Ok(OverfitReport {
        feature: feature.to_string(),
        flag_factor,
        global_test_mse: global,
        bins,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConformalConfig {
    pub alpha: f64,
    pub calib_fraction: f64,
    pub seed: u64,
}

impl Default for ConformalConfig {
    fn default() -> Self {
        ConformalConfig {
            alpha: 0.1,
            calib_fraction: 0.5,
            seed: 0,
        }
    }
}

pub const CONFORMAL_SEGMENTS: usize = 10;
const MIN_CALIBRATION: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalSegment {
    pub lower: f64,
    pub upper: f64,
    pub n_calibration: usize,
    pub n_test: usize,
    pub coverage: Option<f64>,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalBand {
    pub alpha: f64,
    pub q_hat: f64,
    pub coverage: f64,
    pub avg_bandwidth: f64,
    pub n_proper_train: usize,
    pub n_calibration: usize,
    /// Ten deciles of the calibration predictions, each with its own
    /// conformal quantile.
    pub segmented: Vec<ConformalSegment>,
}

/// The `ceil((n + 1)(1 - alpha))`-th smallest score, or `None` when that
/// rank exceeds `n`.
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> Option<f64> {
    let n = scores.len();
    let k = ((n as f64 + 1.0) * (1.0 - alpha) - 1e-9).ceil() as usize;
    if k == 0 {
        return Some(0.0);
    }
    if k > n {
        return None;
    }
    Some(stats::sorted(scores)[k - 1])
}

/// Split conformal prediction: refits the model's spec on part of the
/// training rows and calibrates absolute residuals on the rest.
pub fn conformal_reliability(model: &FittedModel, ds: &TabularDataset, cfg: &ConformalConfig) -> Result<ConformalBand> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::InvalidArgument("alpha must lie in (0, 1)".into()));
    }
    if !(cfg.calib_fraction > 0.0 && cfg.calib_fraction < 1.0) {
        return Err(Error::InvalidArgument("calib_fraction must lie in (0, 1)".into()));
    }
    let mut train = ds.train_indices();
    let n_c = (train.len() as f64 * cfg.calib_fraction).round() as usize;
    if n_c < MIN_CALIBRATION || n_c >= train.len() {
        return Err(Error::InsufficientData(format!(
            "calibration set of {n_c} rows (need at least {MIN_CALIBRATION} and a non-empty proper training set)"
        )));
    }
    if ds.n_test() == 0 {
        return Err(Error::Empty("test split".into()));
    }
    train.shuffle(&mut stats::rng(cfg.seed));
    let (calib, proper) = train.split_at(n_c);
    let mut mask = vec![false; ds.n_rows()];
    proper.iter().for_each(|&i| mask[i] = true);
    let refit = fit(&model.spec, &ds.with_train_mask(mask)?)?;

    let x = ds.x();
    let y = ds.y();
    let calib_pred: Vec<f64> = calib.iter().map(|&i| refit.predict_row(x.row(i))).collect();
    let calib_res: Vec<f64> = calib.iter().zip(&calib_pred).map(|(&i, p)| (y[i] - p).abs()).collect();
    let q_hat = conformal_quantile(&calib_res, cfg.alpha).ok_or_else(|| {
        Error::InsufficientData(format!(
            "calibration set of {n_c} rows is too small for alpha {}",
            cfg.alpha
        ))
    })?;
    let test = ds.test_indices();
    let test_pred: Vec<f64> = test.iter().map(|&i| refit.predict_row(x.row(i))).collect();
    let test_res: Vec<f64> = test.iter().zip(&test_pred).map(|(&i, p)| (y[i] - p).abs()).collect();
    let covered = test_res.iter().filter(|&&r| r <= q_hat).count();

    let edges = stats::rank_quantiles(&stats::sorted(&calib_pred), CONFORMAL_SEGMENTS);
    let cuts = &edges[1..CONFORMAL_SEGMENTS];
    let segment = |p: f64| cuts.partition_point(|&c| c < p);
    let mut seg_cal: Vec<Vec<f64>> = vec![Vec::new(); CONFORMAL_SEGMENTS];
    for (p, r) in calib_pred.iter().zip(&calib_res) {
        seg_cal[segment(*p)].push(*r);
    }
    let mut seg_test: Vec<Vec<f64>> = vec![Vec::new(); CONFORMAL_SEGMENTS];
    for (p, r) in test_pred.iter().zip(&test_res) {
        seg_test[segment(*p)].push(*r);
    }
    let segmented = (0..CONFORMAL_SEGMENTS)
        .map(|s| {
            let cal = &seg_cal[s];
            let q = conformal_quantile(cal, cfg.alpha)
                .or_else(|| cal.iter().copied().reduce(f64::max))
                .unwrap_or(q_hat);
            let t = &seg_test[s];
            ConformalSegment {
                lower: edges[s],
                upper: edges[s + 1],
                n_calibration: cal.len(),
                n_test: t.len(),
                coverage: (!t.is_empty()).then(|| t.iter().filter(|&&r| r <= q).count() as f64 / t.len() as f64),
                bandwidth: 2.0 * q,
            }
        })
        .collect();
    Ok(ConformalBand {
        alpha: cfg.alpha,
        q_hat,
        coverage: covered as f64 / test.len() as f64,
        avg_bandwidth: 2.0 * q_hat,
        n_proper_train: proper.len(),
        n_calibration: n_c,
        segmented,
    })
}

pub fn default_lambdas() -> Vec<f64> {
    (0..=8).map(|k| f64::from(k) * 0.05).collect()
}

pub fn default_ratios() -> Vec<f64> {
    (1..=10).map(|k| f64::from(k) / 10.0).collect()
}

/// Mean test MSE after adding `lambda * std_j` Gaussian noise to every
/// feature, per lambda; lambda 0 is the unperturbed MSE.
pub fn robustness_curve(
    model: &dyn Predictor,
    ds: &TabularDataset,
    lambdas: &[f64],
    repeats: usize,
    seed: u64,
) -> Result<CurveSeries> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    if lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) || lambdas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("lambdas must be strictly ascending within [0, 1]".into()));
    }
    if ds.n_test() == 0 {
        return Err(Error::Empty("test split".into()));
    }
    let x = ds.test_x();
    let y = ds.test_y();
    let std = ds.train_std();
    let baseline = stats::mse(&y, &model.predict(&x)?);
    let mut values = Vec::with_capacity(lambdas.len());
    for (k, &lambda) in lambdas.iter().enumerate() {
        if lambda == 0.0 {
            values.push(baseline);
            continue;
        }
        let mut total = 0.0;
        for r in 0..repeats {
            let mut rng = stats::rng(stats::task_seed(stats::task_seed(seed, k as u64), r as u64));
            let mut xp = x.clone();
            for i in 0..xp.nrows() {
                for (j, s) in std.iter().enumerate() {
                    let e: f64 = rng.sample(StandardNormal);
                    xp.set(i, j, x.get(i, j) + lambda * s * e);
                }
            }
            total += stats::mse(&y, &model.predict(&xp)?);
        }
        values.push(total / repeats as f64);
    }
    let mut c = CurveSeries::new("noise_scale", CurveKind::Robustness, lambdas.to_vec(), values);
    c.metadata.insert("repeats".into(), repeats.into());
    c.metadata.insert("baseline_mse".into(), baseline.into());
    c.metadata.insert("noise".into(), "gaussian, lambda * training std per feature".into());
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    pub feature: String,
    pub worst_mean: f64,
    pub full_mean: f64,
    pub standardized_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResilienceReport {
    pub curve: CurveSeries,
    /// Worst 10% of test rows against the whole test split.
    pub shift: Vec<ShiftRow>,
}

/// MSE over the worst `ceil(ratio * n_test)` test rows by |residual|, plus a
/// standardized mean-shift table for the worst decile.
pub fn resilience_curve(model: &dyn Predictor, ds: &TabularDataset, ratios: &[f64]) -> Result<ResilienceReport> {
    if ratios.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) || ratios.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("ratios must be strictly ascending within (0, 1]".into()));
    }
    let n = ds.n_test();
    if n == 0 {
        return Err(Error::Empty("test split".into()));
    }
    let x = ds.test_x();
    let y = ds.test_y();
    let pred = model.predict(&x)?;
    let full_mse = stats::mse(&y, &pred);
    let sq: Vec<f64> = y.iter().zip(&pred).map(|(a, p)| (a - p) * (a - p)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sq[b].total_cmp(&sq[a]).then(a.cmp(&b)));
    let worst = |ratio: f64| ((ratio * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let values = ratios
        .iter()
        .map(|&r| {
            let k = worst(r).min(n);
            if k == n {
                full_mse
            } else {
                order[..k].iter().map(|&i| sq[i]).sum::<f64>() / k as f64
            }
        })
        .collect();
    let k = worst(0.1).min(n);
    let shift = ds
        .feature_names()
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col = x.column(j);
            let full_mean = stats::mean(&col);
            let worst_mean = order[..k].iter().map(|&i| col[i]).sum::<f64>() / k as f64;
            let sd = stats::std_dev(&col);
            ShiftRow {
                feature: name.clone(),
                worst_mean,
                full_mean,
                standardized_difference: if sd > 0.0 { (worst_mean - full_mean) / sd } else { 0.0 },
            }
        })
        .collect();
    let mut curve = CurveSeries::new("worst_ratio", CurveKind::Resilience, ratios.to_vec(), values);
    curve.metadata.insert(
        "definition".into(),
        "MSE of the ceil(ratio * n_test) test rows with the largest |residual|".into(),
    );
    Ok(ResilienceReport { curve, shift })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnoseConfig {
    pub conformal: ConformalConfig,
    pub lambdas: Vec<f64>,
    pub robustness_repeats: usize,
    pub ratios: Vec<f64>,
    /// Feature used for overfit slicing; `None` picks `cycle` when present,
    /// else the first feature.
    pub overfit_feature: Option<String>,
    pub overfit_bins: usize,
    pub flag_factor: f64,
    pub seed: u64,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        DiagnoseConfig {
            conformal: ConformalConfig::default(),
            lambdas: default_lambdas(),
            robustness_repeats: 10,
            ratios: default_ratios(),
            overfit_feature: None,
            overfit_bins: 10,
            flag_factor: 1.5,
            seed: 0,
        }
    }
}

/// Results of every diagnostic test that succeeded; failures are recorded
/// in `errors` by test name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub model: String,
    pub accuracy: AccuracyReport,
    pub residuals: ResidualPairs,
    pub overfit: Option<OverfitReport>,
    pub reliability: Option<ConformalBand>,
    pub robustness: Option<CurveSeries>,
    pub resilience: Option<ResilienceReport>,
    pub errors: BTreeMap<String, String>,
    pub metadata: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticTest {
    Accuracy,
    Overfit,
    Reliability,
    Robustness,
    Resilience,
}

impl DiagnosticTest {
    pub const ALL: [DiagnosticTest; 5] = [
        DiagnosticTest::Accuracy,
        DiagnosticTest::Overfit,
        DiagnosticTest::Reliability,
        DiagnosticTest::Robustness,
        DiagnosticTest::Resilience,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticTest::Accuracy => "accuracy",
            DiagnosticTest::Overfit => "overfit",
            DiagnosticTest::Reliability => "reliability",
            DiagnosticTest::Robustness => "robustness",
            DiagnosticTest::Resilience => "resilience",
        }
    }
}

impl std::str::FromStr for DiagnosticTest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DiagnosticTest::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown diagnostic test `{s}`")))
    }
}

/// Runs the requested tests. Accuracy and residuals are always computed.
pub fn run_diagnostics(
    model: &FittedModel,
    ds: &TabularDataset,
    tests: &[DiagnosticTest],
    cfg: &DiagnoseConfig,
) -> Result<DiagnosticsReport> {
    let accuracy = accuracy_report(model, ds)?;
    let residuals = residual_pairs(model, ds)?;
    let mut errors = BTreeMap::new();
    fn keep<T>(errors: &mut BTreeMap<String, String>, name: DiagnosticTest, r: Result<T>) -> Option<T> {
        r.map_err(|e| errors.insert(name.as_str().to_string(), e.to_string())).ok()
    }
    let want = |t| tests.contains(&t);
    let feature = cfg.overfit_feature.clone().unwrap_or_else(|| {
        if ds.feature_index("cycle").is_ok() {
            "cycle".to_string()
        } else {
            ds.feature_names().first().cloned().unwrap_or_default()
        }
    });
    let overfit = want(DiagnosticTest::Overfit)
        .then(|| overfit_slices(model, ds, &feature, cfg.overfit_bins, cfg.flag_factor))
        .and_then(|r| keep(&mut errors, DiagnosticTest::Overfit, r));
    let reliability = want(DiagnosticTest::Reliability)
        .then(|| conformal_reliability(model, ds, &cfg.conformal))
        .and_then(|r| keep(&mut errors, DiagnosticTest::Reliability, r));
    let robustness = want(DiagnosticTest::Robustness)
        .then(|| robustness_curve(model, ds, &cfg.lambdas, cfg.robustness_repeats, cfg.seed))
        .and_then(|r| keep(&mut errors, DiagnosticTest::Robustness, r));
    let resilience = want(DiagnosticTest::Resilience)
        .then(|| resilience_curve(model, ds, &cfg.ratios))
        .and_then(|r| keep(&mut errors, DiagnosticTest::Resilience, r));
    let mut metadata = BTreeMap::new();
    metadata.insert(
        "resilience_definition".into(),
        "worst subsample = largest |residual| prefix of the test split; shift table compares the worst 10% with the full split in test-split standard deviations".into(),
    );
    metadata.insert("conformal".into(), "split conformal, spec refit on proper training rows".into());
    Ok(DiagnosticsReport {
        model: model.kind.as_str().to_string(),
        accuracy,
        residuals,
        overfit,
        reliability,
        robustness,
        resilience,
        errors,
        metadata,
    })
}
