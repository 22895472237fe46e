//! Intrinsic interpretability: local linear models of the ReLU network, EBM
//! term tables, tree rule lists and exact per-kind local decompositions.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{Attribution, AttributionMethod, FeatureValue};
use crate::feature_select::{FeatureScoreTable, ScoreMethod};
use crate::ingest::TabularDataset;
use crate::models::ebm::bin_of;
use crate::models::{FittedModel, ModelParams, Predictor, ReluNet};
use crate::stats;

/// The affine map a ReLU network computes on one activation region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalLinearModel {
    /// One '0'/'1' per hidden unit, layer by layer ('1' = preactivation > 0).
    pub pattern_id: String,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub support_count: usize,
    /// Training rows in this region, ascending.
    pub support: Vec<usize>,
    /// R² of the map against the target on its support; `None` when the
    /// target is constant there.
    pub local_r2: Option<f64>,
}

impl LocalLinearModel {
    pub fn evaluate(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(row)
                .map(|(b, x)| b * x)
                .sum::<f64>()
    }
}

pub fn activation_pattern(net: &ReluNet, row: &[f64]) -> String {
    net.preactivations(row)
        .iter()
        .flatten()
        .map(|&z| if z > 0.0 { '1' } else { '0' })
        .collect()
}

/// Composes the layer weights with the 0/1 masks of `pattern`.
fn masked_composition(net: &ReluNet, pattern: &[u8]) -> (Vec<f64>, f64) {
    let d = net.n_inputs();
    // Current map: a (rows = units) x d matrix plus offset.
    let mut a: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|k| if i == k { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut c = vec![0.0; d];
    let mut unit = 0;
    let last = net.layers.len() - 1;
    for (l, layer) in net.layers.iter().enumerate() {
        let mut na = Vec::with_capacity(layer.bias.len());
        let mut nc = Vec::with_capacity(layer.bias.len());
        for (w, b) in layer.weights.iter().zip(&layer.bias) {
            let on = l == last || pattern[unit] == b'1';
            if l < last {
                unit += 1;
            }
            if on {
                na.push((0..d).map(|k| w.iter().zip(&a).map(|(wi, ai)| wi * ai[k]).sum()).collect());
                nc.push(b + w.iter().zip(&c).map(|(wi, ci)| wi * ci).sum::<f64>());
            } else {
                na.push(vec![0.0; d]);
                nc.push(0.0);
            }
        }
        a = na;
        c = nc;
    }
    (a.swap_remove(0), c[0])
}

/// Local linear model of the region containing `row`.
pub fn llm_at(net: &ReluNet, row: &[f64]) -> (String, Vec<f64>, f64) {
    let p = activation_pattern(net, row);
    let (beta, b) = masked_composition(net, p.as_bytes());
    (p, beta, b)
}

/// Groups training rows by activation pattern (first appearance order) and
/// returns the exact affine map of every occupied region.
pub fn extract_llms(model: &FittedModel, ds: &TabularDataset) -> Result<Vec<LocalLinearModel>> {
    let net = model.as_relu()?;
    check_width(model, ds)?;
    let x = ds.x();
    let y = ds.y();
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<usize>> = HashMap::new();
    for i in ds.train_indices() {
        let p = activation_pattern(net, x.row(i));
        groups
            .entry(p.clone())
            .or_insert_with(|| {
                order.push(p);
                Vec::new()
            })
            .push(i);
    }
    Ok(order
        .into_iter()
        .map(|p| {
            let support = groups.remove(&p).unwrap_or_default();
            let (coefficients, intercept) = masked_composition(net, p.as_bytes());
            let llm = LocalLinearModel {
                pattern_id: p,
                coefficients,
                intercept,
                support_count: support.len(),
                support: Vec::new(),
                local_r2: None,
            };
            let truth: Vec<f64> = support.iter().map(|&i| y[i]).collect();
            let fitted: Vec<f64> = support.iter().map(|&i| llm.evaluate(x.row(i))).collect();
            LocalLinearModel {
                local_r2: if support.len() > 1 { stats::r2(&truth, &fitted) } else { None },
                support,
                ..llm
            }
        })
        .collect())
}

fn check_width(model: &FittedModel, ds: &TabularDataset) -> Result<()> {
    if model.n_features() != ds.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            found: ds.n_features(),
        });
    }
    Ok(())
}

/// `sum_r (support_r / n) * |beta_rj| * std_j`, normalized to sum 1.
pub fn llm_feature_importance(llms: &[LocalLinearModel], ds: &TabularDataset) -> Result<FeatureScoreTable> {
    if llms.is_empty() {
        return Err(Error::Empty("local linear model list".into()));
    }
    let d = ds.n_features();
    let n: usize = llms.iter().map(|l| l.support_count).sum();
    let std = ds.train_std();
    let mut scores = vec![0.0; d];
    for l in llms {
        let share = l.support_count as f64 / n.max(1) as f64;
        for j in 0..d {
            scores[j] += share * l.coefficients[j].abs() * std[j];
        }
    }
    let total: f64 = scores.iter().sum();
    if total > 0.0 {
        scores.iter_mut().for_each(|s| *s /= total);
    }
    let mut t = FeatureScoreTable::new(ScoreMethod::LlmImportance, ds.feature_names().to_vec(), scores);
    t.metadata.insert(
        "formula".into(),
        "sum over regions of (support/n_train) * |coefficient| * training std, normalized to sum 1".into(),
    );
    t.metadata.insert("regions".into(), llms.len().into());
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSummary {
    pub feature: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub weighted_mean: f64,
}

/// Parallel-coordinates data (one polyline per region) and support-weighted
/// coefficient distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmCoefficientViews {
    pub feature_names: Vec<String>,
    pub polylines: Vec<Vec<f64>>,
    pub weights: Vec<usize>,
    pub summaries: Vec<CoefficientSummary>,
}

impl LlmCoefficientViews {
    /// `region,support,<feature...>` rows.
    pub fn to_csv(&self) -> String {
        let mut out = format!("region,support,{}\n", self.feature_names.join(","));
        for (r, (line, w)) in self.polylines.iter().zip(&self.weights).enumerate() {
            let vals: Vec<String> = line.iter().map(f64::to_string).collect();
            out.push_str(&format!("{r},{w},{}\n", vals.join(",")));
        }
        out
    }
}

/// Smallest value whose cumulative weight reaches `q` of the total.
pub fn weighted_quantile(pairs: &[(f64, f64)], q: f64) -> f64 {
    let mut s = pairs.to_vec();
    s.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = s.iter().map(|p| p.1).sum();
    let target = q * total;
    let mut cum = 0.0;
    for &(v, w) in &s {
        cum += w;
        if cum >= target - 1e-12 * total {
            return v;
        }
    }
    s.last().map_or(f64::NAN, |p| p.0)
}

pub fn llm_coefficient_views(llms: &[LocalLinearModel], feature_names: &[String]) -> Result<LlmCoefficientViews> {
    if llms.is_empty() {
        return Err(Error::Empty("local linear model list".into()));
    }
    let weights: Vec<usize> = llms.iter().map(|l| l.support_count).collect();
    let total: f64 = weights.iter().sum::<usize>() as f64;
    let summaries = feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let pairs: Vec<(f64, f64)> = llms
                .iter()
                .map(|l| (l.coefficients[j], l.support_count as f64))
                .collect();
            let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let (min, max) = stats::min_max(&values);
            CoefficientSummary {
                feature: name.clone(),
                min,
                q1: weighted_quantile(&pairs, 0.25),
                median: weighted_quantile(&pairs, 0.5),
                q3: weighted_quantile(&pairs, 0.75),
                max,
                weighted_mean: pairs.iter().map(|(v, w)| v * w).sum::<f64>() / total,
            }
        })
        .collect();
    Ok(LlmCoefficientViews {
        feature_names: feature_names.to_vec(),
        polylines: llms.iter().map(|l| l.coefficients.clone()).collect(),
        weights,
        summaries,
    })
}

/// One EBM term as a lookup table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbmTermView {
    /// Feature name, or `a & b` for a pair.
    pub term: String,
    pub features: Vec<usize>,
    /// Cut points of the (first) feature.
    pub bin_edges: Vec<f64>,
    /// Cut points of the second feature of a pair.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub second_bin_edges: Option<Vec<f64>>,
    /// Per bin, or row-major over bin pairs.
    pub contributions: Vec<f64>,
    /// Training-count-weighted mean |contribution|.
    pub importance: f64,
}

impl EbmTermView {
    pub fn lookup(&self, row: &[f64]) -> f64 {
        let a = bin_of(&self.bin_edges, row[self.features[0]]);
        match &self.second_bin_edges {
            None => self.contributions[a],
            Some(cuts) => {
                let b = bin_of(cuts, row[self.features[1]]);
                self.contributions[a * (cuts.len() + 1) + b]
            }
        }
    }

    pub fn is_pair(&self) -> bool {
        self.second_bin_edges.is_some()
    }
}

/// Main and pair term views, most important first (ties keep model order).
pub fn ebm_terms(model: &FittedModel, ds: &TabularDataset) -> Result<Vec<EbmTermView>> {
    let ebm = model.as_ebm()?;
    check_width(model, ds)?;
    let names = ds.feature_names();
    let mut views: Vec<EbmTermView> = ebm
        .mains
        .iter()
        .map(|t| EbmTermView {
            term: names[t.feature].clone(),
            features: vec![t.feature],
            bin_edges: t.cuts.clone(),
            second_bin_edges: None,
            contributions: t.scores.clone(),
            importance: 0.0,
        })
        .chain(ebm.pairs.iter().map(|t| EbmTermView {
            term: format!("{} & {}", names[t.features.0], names[t.features.1]),
            features: vec![t.features.0, t.features.1],
            bin_edges: t.cuts.0.clone(),
            second_bin_edges: Some(t.cuts.1.clone()),
            contributions: t.scores.clone(),
            importance: 0.0,
        }))
        .collect();
    let x = ds.x();
    let train = ds.train_indices();
    for v in &mut views {
        v.importance = if train.is_empty() {
            0.0
        } else {
            train.iter().map(|&i| v.lookup(x.row(i)).abs()).sum::<f64>() / train.len() as f64
        };
    }
    views.sort_by(|a, b| b.importance.total_cmp(&a.importance));
    Ok(views)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Le,
    Gt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub feature: String,
    pub feature_index: usize,
    pub op: Comparison,
    pub threshold: f64,
}

impl Predicate {
    pub fn holds(&self, row: &[f64]) -> bool {
        let v = row[self.feature_index];
        match self.op {
            Comparison::Le => v <= self.threshold,
            Comparison::Gt => v > self.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub tree: usize,
    pub leaf: usize,
    pub predicates: Vec<Predicate>,
    pub value: f64,
    pub n_samples: usize,
}

impl Rule {
    pub fn matches(&self, row: &[f64]) -> bool {
        self.predicates.iter().all(|p| p.holds(row))
    }

    pub fn describe(&self) -> String {
        if self.predicates.is_empty() {
            return format!("always -> {}", self.value);
        }
        let conds: Vec<String> = self
            .predicates
            .iter()
            .map(|p| {
                let op = if p.op == Comparison::Le { "<=" } else { ">" };
                format!("{} {op} {}", p.feature, p.threshold)
            })
            .collect();
        format!("{} -> {}", conds.join(" AND "), self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSummary {
    pub tree: usize,
    pub n_leaves: usize,
    pub n_splits: usize,
    pub depth: usize,
    pub root_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleList {
    pub rules: Vec<Rule>,
    pub trees: Vec<TreeSummary>,
}

impl RuleList {
    /// Sum over trees of the value of the first matching rule.
    pub fn evaluate(&self, row: &[f64]) -> f64 {
        self.trees
            .iter()
            .map(|t| {
                self.rules
                    .iter()
                    .find(|r| r.tree == t.tree && r.matches(row))
                    .map_or(0.0, |r| r.value)
            })
            .sum()
    }

    /// Matching rules per tree (exhaustive and exclusive lists give 1 each).
    pub fn matches_per_tree(&self, row: &[f64]) -> Vec<usize> {
        self.trees
            .iter()
            .map(|t| self.rules.iter().filter(|r| r.tree == t.tree && r.matches(row)).count())
            .collect()
    }
}

/// One path-predicate rule per leaf of every tree.
pub fn tree_structure(model: &FittedModel) -> Result<RuleList> {
    let trees = model.trees()?;
    let names = &model.feature_names;
    let mut rules = Vec::new();
    let mut summaries = Vec::new();
    for (t, tree) in trees.iter().enumerate() {
        let mut stack = vec![(0usize, Vec::<Predicate>::new())];
        let mut leaf_rules = Vec::new();
        while let Some((i, preds)) = stack.pop() {
            let node = &tree.nodes[i];
            match node.split {
                None => leaf_rules.push(Rule {
                    tree: t,
                    leaf: i,
                    predicates: preds,
                    value: node.value,
                    n_samples: node.n_samples,
                }),
                Some(s) => {
                    let mk = |op| Predicate {
                        feature: names[s.feature].clone(),
                        feature_index: s.feature,
                        op,
                        threshold: s.threshold,
                    };
                    let mut right = preds.clone();
                    right.push(mk(Comparison::Gt));
                    let mut left = preds;
                    left.push(mk(Comparison::Le));
                    stack.push((s.right, right));
                    stack.push((s.left, left));
                }
            }
        }
        summaries.push(TreeSummary {
            tree: t,
            n_leaves: leaf_rules.len(),
            n_splits: tree.n_splits(),
            depth: tree.max_depth(),
            root_value: tree.nodes[0].value,
        });
        rules.extend(leaf_rules);
    }
    Ok(RuleList { rules, trees: summaries })
}

/// Exact additive decomposition of one prediction using the model's own
/// structure.
pub fn local_contribution(model: &FittedModel, ds: &TabularDataset, sample_index: usize) -> Result<Attribution> {
    check_width(model, ds)?;
    if sample_index >= ds.n_rows() {
        return Err(Error::InvalidArgument(format!(
            "sample {sample_index} out of range (dataset has {} rows)",
            ds.n_rows()
        )));
    }
    let names = ds.feature_names();
    let row = ds.x().row(sample_index);
    let mut metadata = BTreeMap::new();
    let (base, features): (f64, Vec<FeatureValue>) = match &model.parameters {
        ModelParams::ReluDnn(net) => {
            let (pattern, beta, b) = llm_at(net, row);
            metadata.insert("pattern_id".into(), pattern.into());
            metadata.insert("decomposition".into(), "coefficient * value in the local linear region".into());
            let f = names
                .iter()
                .zip(beta.iter().zip(row))
                .map(|(n, (w, x))| FeatureValue { name: n.clone(), value: w * x })
                .collect();
            (b, f)
        }
        ModelParams::Ebm(ebm) => {
            metadata.insert("decomposition".into(), "term table lookups".into());
            let mut f: Vec<FeatureValue> = ebm
                .mains
                .iter()
                .map(|t| FeatureValue { name: names[t.feature].clone(), value: t.score(row) })
                .collect();
            f.extend(ebm.pairs.iter().map(|t| FeatureValue {
                name: format!("{} & {}", names[t.features.0], names[t.features.1]),
                value: t.score(row),
            }));
            (ebm.intercept, f)
        }
        ModelParams::Tree(_) | ModelParams::Figs(_) => {
            metadata.insert(
                "decomposition".into(),
                "child mean minus parent mean along each decision path, credited to the split feature".into(),
            );
            let mut credit = vec![0.0; names.len()];
            let mut base = 0.0;
            for tree in model.trees()? {
                let path = tree.decision_path(row);
                base += tree.nodes[path[0]].value;
                for w in path.windows(2) {
                    let parent = &tree.nodes[w[0]];
                    let feat = parent.split.expect("internal node").feature;
                    credit[feat] += tree.nodes[w[1]].value - parent.value;
                }
            }
            let f = names
                .iter()
                .zip(credit)
                .map(|(n, v)| FeatureValue { name: n.clone(), value: v })
                .collect();
            (base, f)
        }
    };
    metadata.insert("model_kind".into(), model.kind.as_str().into());
    metadata.insert("prediction".into(), model.predict_row(row).into());
    Ok(Attribution {
        method: AttributionMethod::Intrinsic,
        sample_index,
        base_value: base,
        features,
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::models::{fit, ModelSpec, ReluDnnSpec, TreeSpec};
    use rand::Rng;

    fn data(n: usize, seed: u64) -> TabularDataset {
        let mut rng = stats::rng(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let y = rows.iter().map(|r| (r[0] - 0.5).abs() + r[1] * r[2]).collect();
        TabularDataset::new(
            vec!["a".into(), "b".into(), "c".into()],
            Matrix::from_rows(&rows).unwrap(),
            y,
            (0..n).map(|i| i % 4 != 0).collect(),
        )
        .unwrap()
    }

    #[test]
    fn llms_reproduce_network_and_partition_rows() {
        let ds = data(120, 1);
        let spec = ReluDnnSpec { layer_sizes: vec![6, 5], max_epochs: 50, ..ReluDnnSpec::default() };
        let m = fit(&ModelSpec::ReluDnn(spec), &ds).unwrap();
        let llms = extract_llms(&m, &ds).unwrap();
        let total: usize = llms.iter().map(|l| l.support_count).sum();
        assert_eq!(total, ds.n_train());
        for l in &llms {
            assert_eq!(l.pattern_id.len(), 11);
            for &i in &l.support {
                let row = ds.x().row(i);
                assert!((l.evaluate(row) - m.predict_row(row)).abs() < 1e-9);
            }
        }
        let a = local_contribution(&m, &ds, 7).unwrap();
        assert!((a.total() - m.predict_row(ds.x().row(7))).abs() < 1e-9);
    }

    #[test]
    fn weighted_quantiles_of_single_region() {
        let l = LocalLinearModel {
            pattern_id: "1".into(),
            coefficients: vec![2.0, -1.0],
            intercept: 0.0,
            support_count: 5,
            support: vec![],
            local_r2: None,
        };
        let v = llm_coefficient_views(&[l], &["a".into(), "b".into()]).unwrap();
        let s = &v.summaries[0];
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (2.0, 2.0, 2.0, 2.0, 2.0));
        assert_eq!(v.polylines.len(), 1);
        assert_eq!(weighted_quantile(&[(1.0, 1.0), (5.0, 3.0)], 0.5), 5.0);
    }

    #[test]
    fn rules_are_exhaustive_and_match_predictions() {
        let ds = data(200, 2);
        let m = fit(&ModelSpec::Tree(TreeSpec::default()), &ds).unwrap();
        let rules = tree_structure(&m).unwrap();
        assert_eq!(rules.rules.len(), m.trees().unwrap()[0].leaves().count());
        for row in ds.x().row_iter().take(50) {
            assert_eq!(rules.matches_per_tree(row), vec![1]);
            assert_eq!(rules.evaluate(row), m.predict_row(row));
        }
        let a = local_contribution(&m, &ds, 3).unwrap();
        assert!((a.total() - m.predict_row(ds.x().row(3))).abs() < 1e-12);
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let ds = data(60, 3);
        let m = fit(&ModelSpec::Tree(TreeSpec::default()), &ds).unwrap();
        assert!(matches!(extract_llms(&m, &ds), Err(Error::WrongModelKind { .. })));
        assert!(matches!(ebm_terms(&m, &ds), Err(Error::WrongModelKind { .. })));
    }
}
