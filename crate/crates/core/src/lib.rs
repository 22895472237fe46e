//! Interpretable remaining-useful-life (RUL) modelling.
//!
//! The crate covers the whole pipeline for run-to-failure sensor logs:
//!
//! * [`ingest`] loads PHM08-style trajectories, derives RUL targets and builds
//!   a scaled train/test [`TabularDataset`](ingest::TabularDataset).
//! * [`feature_select`] scores candidate features (Pearson, distance
//!   correlation, boosted-tree importance, randomized conditional
//!   independence) and produces EDA summaries.
//! * [`models`] fits four interpretable regressors: CART, FIGS, EBM and a
//!   ReLU network, behind the [`Predictor`](models::Predictor) contract.
//! * [`explain`] holds model-agnostic explainers (PFI, PDP, ALE, LIME, exact
//!   Shapley values).
//! * [`interpret`] extracts intrinsic structure: local linear models of the
//!   ReLU network, EBM term tables and tree rule lists.
//! * [`diagnose`] runs the accuracy / overfit / reliability / robustness /
//!   resilience battery.
//!
//! The `rulxai` binary drives the pipeline through [`cli`].

pub mod cli;
pub mod diagnose;
pub mod error;
pub mod explain;
pub mod feature_select;
pub mod ingest;
pub mod interpret;
pub mod matrix;
pub mod models;
pub mod plot;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use matrix::Matrix;
