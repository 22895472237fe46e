//! The four interpretable regressors and their shared prediction contract.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TabularDataset;
use crate::matrix::Matrix;

pub mod cart;
pub mod ebm;
pub mod figs;
pub mod gbdt;
pub mod relu;
pub mod tree;

pub use cart::{fit_decision_tree, TreeSpec};
pub use ebm::{fit_ebm, EbmModel, EbmSpec};
pub use figs::{fit_figs, FigsModel, FigsSpec};
pub use relu::{fit_relu_dnn, ReluDnnSpec, ReluNet};
pub use tree::RegressionTree;

/// Version tag written into serialized model documents.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Anything that maps a feature row to a real prediction.
pub trait Predictor {
    fn n_features(&self) -> usize;

    fn predict_row(&self, row: &[f64]) -> f64;

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.nrows() > 0 && x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: x.ncols(),
            });
        }
        Ok(x.row_iter().map(|r| self.predict_row(r)).collect())
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        (**self).predict_row(row)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Tree,
    Figs,
    Ebm,
    ReluDnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::ReluDnn,
        ModelKind::Tree,
        ModelKind::Figs,
        ModelKind::Ebm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Tree => "tree",
            ModelKind::Figs => "figs",
            ModelKind::Ebm => "ebm",
            ModelKind::ReluDnn => "relu_dnn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tree" => Ok(ModelKind::Tree),
            "figs" => Ok(ModelKind::Figs),
            "ebm" => Ok(ModelKind::Ebm),
            "relu_dnn" | "relu" | "relu-dnn" => Ok(ModelKind::ReluDnn),
            other => Err(Error::InvalidArgument(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Training configuration of one model kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Tree(TreeSpec),
    Figs(FigsSpec),
    Ebm(EbmSpec),
    ReluDnn(ReluDnnSpec),
}

impl ModelSpec {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Tree => ModelSpec::Tree(TreeSpec::default()),
            ModelKind::Figs => ModelSpec::Figs(FigsSpec::default()),
            ModelKind::Ebm => ModelSpec::Ebm(EbmSpec::default()),
            ModelKind::ReluDnn => ModelSpec::ReluDnn(ReluDnnSpec::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Tree(_) => ModelKind::Tree,
            ModelSpec::Figs(_) => ModelKind::Figs,
            ModelSpec::Ebm(_) => ModelKind::Ebm,
            ModelSpec::ReluDnn(_) => ModelKind::ReluDnn,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ModelSpec::Ebm(s) => s.seed,
            ModelSpec::ReluDnn(s) => s.seed,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelParams {
    Tree(RegressionTree),
    Figs(FigsModel),
    Ebm(EbmModel),
    ReluDnn(ReluNet),
}

/// A trained regressor together with what is needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub format_version: u32,
    pub kind: ModelKind,
    pub spec: ModelSpec,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub parameters: ModelParams,
}

impl FittedModel {
    pub(crate) fn new(spec: ModelSpec, feature_names: Vec<String>, parameters: ModelParams) -> Self {
        FittedModel {
            format_version: MODEL_FORMAT_VERSION,
            kind: spec.kind(),
            seed: spec.seed(),
            spec,
            feature_names,
            parameters,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: FittedModel = serde_json::from_str(text)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported model format version {}",
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub(crate) fn expect_kind(&self, kind: ModelKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::WrongModelKind {
                expected: kind.to_string(),
                found: self.kind.to_string(),
            })
        }
    }

    pub fn as_relu(&self) -> Result<&ReluNet> {
        match &self.parameters {
            ModelParams::ReluDnn(n) => Ok(n),
            _ => Err(self.expect_kind(ModelKind::ReluDnn).unwrap_err()),
        }
    }

    pub fn as_ebm(&self) -> Result<&EbmModel> {
        match &self.parameters {
            ModelParams::Ebm(m) => Ok(m),
            _ => Err(self.expect_kind(ModelKind::Ebm).unwrap_err()),
        }
    }

    /// The trees of a tree or FIGS model.
    pub fn trees(&self) -> Result<Vec<&RegressionTree>> {
        match &self.parameters {
            ModelParams::Tree(t) => Ok(vec![t]),
            ModelParams::Figs(f) => Ok(f.trees.iter().collect()),
            _ => Err(Error::WrongModelKind {
                expected: "tree or figs".into(),
                found: self.kind.to_string(),
            }),
        }
    }
}

impl Predictor for FittedModel {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.parameters {
            ModelParams::Tree(t) => t.predict_row(row),
            ModelParams::Figs(f) => f.predict_row(row),
            ModelParams::Ebm(m) => m.predict_row(row),
            ModelParams::ReluDnn(n) => n.predict_row(row),
        }
    }
}

/// Fits the model described by `spec` on the training split of `ds`.
pub fn fit(spec: &ModelSpec, ds: &TabularDataset) -> Result<FittedModel> {
    match spec {
        ModelSpec::Tree(s) => fit_decision_tree(ds, s),
        ModelSpec::Figs(s) => fit_figs(ds, s),
        ModelSpec::Ebm(s) => fit_ebm(ds, s),
        ModelSpec::ReluDnn(s) => fit_relu_dnn(ds, s),
    }
}

/// Convenience alias for [`Predictor::predict`] on a fitted model.
pub fn predict(model: &FittedModel, x: &Matrix) -> Result<Vec<f64>> {
    model.predict(x)
}
