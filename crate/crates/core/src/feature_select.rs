//! Feature scoring and filtering: Pearson correlation, distance correlation,
//! boosted-tree split gains and a randomized conditional-independence test.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TabularDataset;
use crate::models::gbdt::{fit_gbdt, GbdtConfig};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMethod {
    Pearson,
    DistanceCorr,
    GbdtImportance,
    RcitDependence,
    Permutation,
    LlmImportance,
}

impl ScoreMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreMethod::Pearson => "pearson",
            ScoreMethod::DistanceCorr => "distance_corr",
            ScoreMethod::GbdtImportance => "gbdt_importance",
            ScoreMethod::RcitDependence => "rcit_dependence",
            ScoreMethod::Permutation => "permutation",
            ScoreMethod::LlmImportance => "llm_importance",
        }
    }
}

/// Per-feature scores produced by one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScoreTable {
    pub method: ScoreMethod,
    pub feature_names: Vec<String>,
    pub scores: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dependent: Option<Vec<bool>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl FeatureScoreTable {
    pub fn new(method: ScoreMethod, feature_names: Vec<String>, scores: Vec<f64>) -> Self {
        FeatureScoreTable {
            method,
            feature_names,
            scores,
            p_values: None,
            dependent: None,
            threshold: None,
            metadata: BTreeMap::new(),
        }
    }

    pub fn score_of(&self, name: &str) -> Option<f64> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .map(|j| self.scores[j])
    }

    /// Feature indices by descending |score|, ties by ascending index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| {
            self.scores[b]
                .abs()
                .total_cmp(&self.scores[a].abs())
                .then(a.cmp(&b))
        });
        idx
    }

    pub fn top_feature(&self) -> Option<&str> {
        self.ranking().first().map(|&j| self.feature_names[j].as_str())
    }

    /// `feature,score,method` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,score,method\n");
        for (n, s) in self.feature_names.iter().zip(&self.scores) {
            out.push_str(&format!("{n},{s},{}\n", self.method.as_str()));
        }
        out
    }
}

fn require_rows(ds: &TabularDataset, min: usize) -> Result<Vec<usize>> {
    let rows = ds.train_indices();
    if rows.len() < min {
        return Err(Error::InsufficientData(format!(
            "need at least {min} training rows, got {}",
            rows.len()
        )));
    }
    Ok(rows)
}

/// Pearson r of every feature against the target on the training split.
pub fn pearson_scores(ds: &TabularDataset) -> Result<FeatureScoreTable> {
    require_rows(ds, 2)?;
    let y = ds.train_y();
    let scores = (0..ds.n_features())
        .map(|j| stats::pearson(&ds.train_column(j), &y))
        .collect();
    Ok(FeatureScoreTable::new(
        ScoreMethod::Pearson,
        ds.feature_names().to_vec(),
        scores,
    ))
}

/// Double-centred distance matrix entries are formed on the fly from row
/// means, so memory stays O(n).
fn centered_sums(v: &[f64]) -> (Vec<f64>, f64) {
    let n = v.len();
    let row: Vec<f64> = (0..n)
        .map(|i| v.iter().map(|b| (v[i] - b).abs()).sum::<f64>() / n as f64)
        .collect();
    let grand = row.iter().sum::<f64>() / n as f64;
    (row, grand)
}

/// Sample distance correlation (V-statistic); 0 when either side is constant.
pub fn distance_correlation_pair(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 || stats::is_constant(x) || stats::is_constant(y) {
        return 0.0;
    }
    let (ra, ga) = centered_sums(x);
    let (rb, gb) = centered_sums(y);
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let a = (x[i] - x[j]).abs() - ra[i] - ra[j] + ga;
            let b = (y[i] - y[j]).abs() - rb[i] - rb[j] + gb;
            xy += a * b;
            xx += a * a;
            yy += b * b;
        }
    }
    if xx <= 0.0 || yy <= 0.0 {
        return 0.0;
    }
    let r2 = xy / (xx.sqrt() * yy.sqrt());
    r2.max(0.0).sqrt().min(1.0)
}

pub fn distance_correlation(ds: &TabularDataset) -> Result<FeatureScoreTable> {
    require_rows(ds, 2)?;
    let y = ds.train_y();
    let scores = (0..ds.n_features())
        .map(|j| distance_correlation_pair(&ds.train_column(j), &y))
        .collect();
    Ok(FeatureScoreTable::new(
        ScoreMethod::DistanceCorr,
        ds.feature_names().to_vec(),
        scores,
    ))
}

/// Split-gain importance of a least-squares boosted ensemble, normalized to
/// sum 1 (all zeros when no split was made).
pub fn gbdt_importance(ds: &TabularDataset, cfg: &GbdtConfig) -> Result<FeatureScoreTable> {
    require_rows(ds, 10)?;
    let model = fit_gbdt(ds, cfg)?;
    let mut gains = model.split_gains(ds.n_features());
    let total: f64 = gains.iter().sum();
    if total > 0.0 {
        gains.iter_mut().for_each(|g| *g /= total);
    }
    let mut t = FeatureScoreTable::new(
        ScoreMethod::GbdtImportance,
        ds.feature_names().to_vec(),
        gains,
    );
    t.metadata.insert("num_trees".into(), cfg.num_trees.into());
    t.metadata.insert("max_depth".into(), cfg.max_depth.into());
    t.metadata.insert("learning_rate".into(), cfg.learning_rate.into());
    t.metadata.insert("trees_fitted".into(), model.trees.len().into());
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RcitInit {
    /// Condition on every other candidate feature.
    None,
    /// Condition on the features ranked above the tested one by boosted-tree
    /// importance.
    FeatureImportance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RcitConfig {
    /// Random Fourier features for the conditioning set (the kernel size).
    pub num_fourier_features: usize,
    /// Random Fourier features for the tested feature and the target.
    pub num_xy_features: usize,
    pub alpha: f64,
    pub num_permutations: usize,
    pub ridge: f64,
    pub seed: u64,
    pub initialization: RcitInit,
}

impl Default for RcitConfig {
    fn default() -> Self {
        RcitConfig {
            num_fourier_features: 100,
            num_xy_features: 5,
            alpha: 0.01,
            num_permutations: 500,
            ridge: 1e-3,
            seed: 0,
            initialization: RcitInit::None,
        }
    }
}

/// Result of one conditional-independence test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcitOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

fn standardize(v: &[f64]) -> Vec<f64> {
    let m = stats::mean(v);
    let s = stats::std_dev(v);
    if s > 0.0 {
        v.iter().map(|x| (x - m) / s).collect()
    } else {
        vec![0.0; v.len()]
    }
}

fn median_pairwise_distance(rows: &DMatrix<f64>) -> f64 {
    let n = rows.nrows().min(500);
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push((rows.row(i) - rows.row(j)).norm());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d[d.len() / 2];
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Column-centred random Fourier features of a Gaussian kernel with
/// median-heuristic bandwidth.
fn fourier_features<R: Rng>(data: &DMatrix<f64>, count: usize, rng: &mut R) -> DMatrix<f64> {
    let (n, p) = data.shape();
    let sigma = median_pairwise_distance(data);
    let w = DMatrix::from_fn(p, count, |_, _| rng.sample::<f64, _>(StandardNormal) / sigma);
    let b: Vec<f64> = (0..count).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let scale = (2.0 / count as f64).sqrt();
    let proj = data * w;
    let mut f = DMatrix::from_fn(n, count, |i, k| scale * (proj[(i, k)] + b[k]).cos());
    for k in 0..count {
        let m = f.column(k).mean();
        f.column_mut(k).add_scalar_mut(-m);
    }
    f
}

/// Ridge residual of `target` on `basis` (both column-centred).
fn residualize(target: &DMatrix<f64>, basis: Option<&DMatrix<f64>>, ridge: f64) -> Result<DMatrix<f64>> {
    let Some(z) = basis else {
        return Ok(target.clone());
    };
    let n = z.nrows() as f64;
    let mut czz = z.transpose() * z / n;
    for k in 0..czz.nrows() {
        czz[(k, k)] += ridge;
    }
    let czt = z.transpose() * target / n;
    let chol = czz
        .cholesky()
        .ok_or_else(|| Error::SingularDesign("conditioning covariance not positive definite".into()))?;
    let beta = chol.solve(&czt);
    Ok(target - z * beta)
}

fn cross_statistic(rx: &DMatrix<f64>, ry: &DMatrix<f64>, order: Option<&[usize]>) -> f64 {
    let n = rx.nrows();
    let (px, py) = (rx.ncols(), ry.ncols());
    let mut c = vec![0.0; px * py];
    for i in 0..n {
        let src = order.map_or(i, |o| o[i]);
        for a in 0..px {
            let xa = rx[(src, a)];
            for b in 0..py {
                c[a * py + b] += xa * ry[(i, b)];
            }
        }
    }
    let nf = n as f64;
    c.iter().map(|v| (v / nf) * (v / nf)).sum::<f64>() * nf
}

/// Tests `x` independent of `y` given `z` (columns of `z` may be empty).
pub fn rcit_test(x: &[f64], y: &[f64], z: &[Vec<f64>], cfg: &RcitConfig, seed: u64) -> Result<RcitOutcome> {
    let n = x.len();
    if cfg.num_fourier_features < 1 || cfg.num_xy_features < 1 {
        return Err(Error::InvalidArgument("number of Fourier features must be at least 1".into()));
    }
    if n < 20 {
        return Err(Error::InsufficientData(format!("RCIT needs at least 20 rows, got {n}")));
    }
    let mut rng = stats::rng(seed);
    let xs = DMatrix::from_column_slice(n, 1, &standardize(x));
    let ys = DMatrix::from_column_slice(n, 1, &standardize(y));
    let fx = fourier_features(&xs, cfg.num_xy_features, &mut rng);
    let fy = fourier_features(&ys, cfg.num_xy_features, &mut rng);
    let fz = if z.is_empty() {
        None
    } else {
        let cols: Vec<Vec<f64>> = z.iter().map(|c| standardize(c)).collect();
        let zm = DMatrix::from_fn(n, cols.len(), |i, k| cols[k][i]);
        Some(fourier_features(&zm, cfg.num_fourier_features, &mut rng))
    };
    let rx = residualize(&fx, fz.as_ref(), cfg.ridge)?;
    let ry = residualize(&fy, fz.as_ref(), cfg.ridge)?;
    let statistic = cross_statistic(&rx, &ry, None);
    let mut order: Vec<usize> = (0..n).collect();
    let mut exceed = 0usize;
    for _ in 0..cfg.num_permutations {
        order.shuffle(&mut rng);
        if cross_statistic(&rx, &ry, Some(&order)) >= statistic {
            exceed += 1;
        }
    }
    Ok(RcitOutcome {
        statistic,
        p_value: (1 + exceed) as f64 / (1 + cfg.num_permutations) as f64,
    })
}

/// Conditional dependence of each feature and the target. Scores are
/// `1 - p`; a feature is flagged dependent when `p < alpha`.
pub fn rcit_dependence(ds: &TabularDataset, cfg: &RcitConfig) -> Result<FeatureScoreTable> {
    if cfg.num_fourier_features < 1 {
        return Err(Error::InvalidArgument("num_fourier_features must be at least 1".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::InvalidArgument("alpha must lie in (0, 1)".into()));
    }
    require_rows(ds, 20)?;
    let d = ds.n_features();
    let y = ds.train_y();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| ds.train_column(j)).collect();
    let varying: Vec<bool> = cols.iter().map(|c| !stats::is_constant(c)).collect();
    let rank: Option<Vec<usize>> = match cfg.initialization {
        RcitInit::None => None,
        RcitInit::FeatureImportance => {
            let imp = gbdt_importance(ds, &GbdtConfig { seed: cfg.seed, ..GbdtConfig::default() })?;
            let mut pos = vec![0; d];
            for (r, j) in imp.ranking().into_iter().enumerate() {
                pos[j] = r;
            }
            Some(pos)
        }
    };
    let mut p_values = vec![1.0; d];
    for j in 0..d {
        if !varying[j] {
            continue;
        }
        let z: Vec<Vec<f64>> = (0..d)
            .filter(|&k| k != j && varying[k])
            .filter(|&k| rank.as_ref().is_none_or(|r| r[k] < r[j]))
            .map(|k| cols[k].clone())
            .collect();
        p_values[j] = rcit_test(&cols[j], &y, &z, cfg, stats::task_seed(cfg.seed, j as u64))?.p_value;
    }
    let mut t = FeatureScoreTable::new(
        ScoreMethod::RcitDependence,
        ds.feature_names().to_vec(),
        p_values.iter().map(|p| 1.0 - p).collect(),
    );
    t.dependent = Some(p_values.iter().map(|&p| p < cfg.alpha).collect());
    t.p_values = Some(p_values);
    t.threshold = Some(cfg.alpha);
    let init = match cfg.initialization {
        RcitInit::None => "none: conditioning set = all other varying features",
        RcitInit::FeatureImportance => {
            "feature_importance: conditioning set = features ranked above by gbdt importance"
        }
    };
    t.metadata.insert("initialization".into(), init.into());
    t.metadata.insert("kernel".into(), "gaussian, median pairwise distance bandwidth".into());
    t.metadata.insert("ridge".into(), cfg.ridge.into());
    t.metadata.insert("num_fourier_features".into(), cfg.num_fourier_features.into());
    t.metadata.insert("num_xy_features".into(), cfg.num_xy_features.into());
    t.metadata.insert("num_permutations".into(), cfg.num_permutations.into());
    Ok(t)
}

/// Names whose |score| exceeds `threshold`, by descending |score| with ties
/// broken by column order.
pub fn select_features(scores: &FeatureScoreTable, threshold: f64) -> Result<Vec<String>> {
    if !threshold.is_finite() {
        return Err(Error::InvalidArgument("threshold must be finite".into()));
    }
    Ok(scores
        .ranking()
        .into_iter()
        .filter(|&j| scores.scores[j].abs() > threshold)
        .map(|j| scores.feature_names[j].clone())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureHistogram {
    pub feature: String,
    /// `counts.len() + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdaSummary {
    pub histograms: Vec<FeatureHistogram>,
    /// `(cycle, RUL)` pairs for every row.
    pub cycle_rul: Vec<(f64, f64)>,
    pub correlation: CorrelationMatrix,
}

pub const HISTOGRAM_BINS: usize = 20;

fn histogram(feature: &str, v: &[f64]) -> FeatureHistogram {
    let (mut lo, mut hi) = stats::min_max(v);
    if !(hi > lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let edges = (0..=HISTOGRAM_BINS)
        .map(|k| if k == HISTOGRAM_BINS { hi } else { lo + width * k as f64 })
        .collect();
    let mut counts = vec![0; HISTOGRAM_BINS];
    for &x in v {
        let b = (((x - lo) / width).floor() as usize).min(HISTOGRAM_BINS - 1);
        counts[b] += 1;
    }
    FeatureHistogram {
        feature: feature.to_string(),
        edges,
        counts,
    }
}

/// Histograms, the cycle-RUL scatter and the feature+target correlation
/// matrix over all rows.
pub fn eda_summary(ds: &TabularDataset) -> EdaSummary {
    let d = ds.n_features();
    let mut cols: Vec<Vec<f64>> = (0..d).map(|j| ds.x().column(j)).collect();
    cols.push(ds.y().to_vec());
    let mut names = ds.feature_names().to_vec();
    names.push("RUL".to_string());
    let histograms = (0..d).map(|j| histogram(&names[j], &cols[j])).collect();
    let cycle_rul = match ds.feature_index("cycle") {
        Ok(j) => cols[j].iter().copied().zip(ds.y().iter().copied()).collect(),
        Err(_) => Vec::new(),
    };
    let k = cols.len();
    let mut values = vec![vec![0.0; k]; k];
    for a in 0..k {
        values[a][a] = if stats::is_constant(&cols[a]) { 0.0 } else { 1.0 };
        for b in a + 1..k {
            let r = stats::pearson(&cols[a], &cols[b]);
            values[a][b] = r;
            values[b][a] = r;
        }
    }
    EdaSummary {
        histograms,
        cycle_rul,
        correlation: CorrelationMatrix { names, values },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Matrix;

    fn ds_from(cols: Vec<Vec<f64>>, y: Vec<f64>) -> TabularDataset {
        let n = y.len();
        let names = (0..cols.len()).map(|j| format!("f{j}")).collect();
        TabularDataset::new(names, Matrix::from_columns(&cols).unwrap(), y, vec![true; n]).unwrap()
    }

    /// Literal definition: explicit distance matrices, explicit double
    /// centring.
    fn dcor_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let center = |v: &[f64]| {
            let d: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (v[i] - v[j]).abs()).collect()).collect();
            let rm: Vec<f64> = d.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
            let cm: Vec<f64> = (0..n).map(|j| (0..n).map(|i| d[i][j]).sum::<f64>() / n as f64).collect();
            let g = rm.iter().sum::<f64>() / n as f64;
            (0..n)
                .map(|i| (0..n).map(|j| d[i][j] - rm[i] - cm[j] + g).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        };
        let a = center(x);
        let b = center(y);
        let mut dcov = 0.0;
        let mut va = 0.0;
        let mut vb = 0.0;
        for i in 0..n {
            for j in 0..n {
                dcov += a[i][j] * b[i][j];
                va += a[i][j] * a[i][j];
                vb += b[i][j] * b[i][j];
            }
        }
        let nn = (n * n) as f64;
        ((dcov / nn) / ((va / nn) * (vb / nn)).sqrt()).sqrt()
    }

    #[test]
    fn distance_correlation_matches_definition() {
        let mut rng = stats::rng(11);
        let x: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v + 0.1 * rng.random_range(-1.0..1.0)).collect();
        let fast = distance_correlation_pair(&x, &y);
        let slow = dcor_oracle(&x, &y);
        assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
    }

    #[test]
    fn distance_correlation_identity_and_affine() {
        let x: Vec<f64> = (0..40).map(|i| ((i * 17) % 23) as f64).collect();
        assert!((distance_correlation_pair(&x, &x) - 1.0).abs() < 1e-12);
        let ax: Vec<f64> = x.iter().map(|v| -3.5 * v + 2.0).collect();
        assert!((distance_correlation_pair(&x, &ax) - 1.0).abs() < 1e-9);
        assert_eq!(distance_correlation_pair(&x, &[1.0; 40]), 0.0);
    }

    #[test]
    fn pearson_handles_constant_columns() {
        let y: Vec<f64> = (0..10).map(f64::from).collect();
        let t = pearson_scores(&ds_from(vec![y.iter().map(|v| 9.0 - v).collect(), vec![4.0; 10]], y)).unwrap();
        assert_eq!(t.scores, vec![-1.0, 0.0]);
    }

    #[test]
    fn selection_orders_by_magnitude() {
        let t = FeatureScoreTable::new(
            ScoreMethod::Pearson,
            vec!["A".into(), "B".into(), "C".into(), "D".into()],
            vec![0.5, 0.005, -0.7, 0.5],
        );
        assert_eq!(select_features(&t, 0.01).unwrap(), vec!["C", "A", "D"]);
        assert!(select_features(&t, 2.0).unwrap().is_empty());
        assert!(select_features(&t, f64::NAN).is_err());
    }

    #[test]
    fn gbdt_prefers_the_signal_feature() {
        let mut rng = stats::rng(5);
        let a: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = a
            .iter()
            .map(|v| 10.0 * f64::from(u8::from(*v > 0.5)) + 0.01 * rng.random_range(-1.0..1.0))
            .collect();
        let t = gbdt_importance(&ds_from(vec![a, b], y), &GbdtConfig::default()).unwrap();
        assert!(t.scores[0] > 0.95, "{:?}", t.scores);
        assert!((t.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gbdt_on_flat_target_is_all_zero() {
        let a: Vec<f64> = (0..20).map(f64::from).collect();
        let t = gbdt_importance(&ds_from(vec![a], vec![1.0; 20]), &GbdtConfig::default()).unwrap();
        assert_eq!(t.scores, vec![0.0]);
    }

    #[test]
    fn gbdt_invariant_to_column_order() {
        let mut rng = stats::rng(8);
        let a: Vec<f64> = (0..120).map(|_| rng.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..120).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p * 2.0 + q * q).collect();
        let t1 = gbdt_importance(&ds_from(vec![a.clone(), b.clone()], y.clone()), &GbdtConfig::default()).unwrap();
        let t2 = gbdt_importance(&ds_from(vec![b, a], y), &GbdtConfig::default()).unwrap();
        assert!((t1.scores[0] - t2.scores[1]).abs() < 1e-9);
        assert!((t1.scores[1] - t2.scores[0]).abs() < 1e-9);
    }

    #[test]
    fn rcit_detects_direct_dependence() {
        let mut rng = stats::rng(2);
        let x: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..1.0)).collect();
        let cfg = RcitConfig { num_permutations: 200, ..RcitConfig::default() };
        let out = rcit_test(&x, &x, &[], &cfg, 1).unwrap();
        assert!(out.p_value < cfg.alpha);
        assert_eq!(out.p_value, 1.0 / 201.0);
    }

    #[test]
    fn rcit_rejects_bad_config() {
        let x = vec![0.0; 30];
        let cfg = RcitConfig { num_fourier_features: 0, ..RcitConfig::default() };
        assert!(rcit_test(&x, &x, &[], &cfg, 0).is_err());
        assert!(rcit_test(&x[..10], &x[..10], &[], &RcitConfig::default(), 0).is_err());
    }

    #[test]
    fn eda_matrix_is_symmetric_with_unit_diagonal() {
        let y: Vec<f64> = (0..30).map(|i| f64::from(29 - i)).collect();
        let cycle: Vec<f64> = (1..=30).map(f64::from).collect();
        let ds = TabularDataset::new(
            vec!["cycle".into(), "flat".into()],
            Matrix::from_columns(&[cycle, vec![2.0; 30]]).unwrap(),
            y,
            vec![true; 30],
        )
        .unwrap();
        let eda = eda_summary(&ds);
        let m = &eda.correlation.values;
        assert_eq!(m[0][0], 1.0);
        assert_eq!(m[1][1], 0.0);
        assert_eq!(m[0][2], -1.0);
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(m[a][b], m[b][a]);
            }
        }
        assert_eq!(eda.histograms[0].counts.iter().sum::<usize>(), 30);
        assert_eq!(eda.histograms[0].edges.len(), 21);
        assert_eq!(eda.cycle_rul.len(), 30);
    }
}
