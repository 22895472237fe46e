//! Command-line pipeline driver: configuration, per-stage artifacts, SVG
//! plots, the run manifest and the markdown report.
//!
//! Every stage reads its inputs from and writes its outputs to
//! `<out>/<stage>/`. Exit codes: 0 success, 2 input error, 3 computation
//! failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::diagnose::{self, DiagnoseConfig, DiagnosticTest, DiagnosticsReport};
use crate::error::Error;
use crate::explain::{self, Attribution, CurveKind, CurveSeries, LimeConfig};
use crate::feature_select::{self, FeatureScoreTable, RcitConfig};
use crate::ingest::{self, DatasetSnapshot, RecordFormat, SplitSpec, TabularDataset};
use crate::interpret;
use crate::models::gbdt::GbdtConfig;
use crate::models::{self, EbmSpec, FigsSpec, FittedModel, ModelKind, ModelSpec, ReluDnnSpec, TreeSpec};
use crate::plot;
use crate::simulate::{self, SurrogateConfig};
use crate::stats;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;

pub const SEED_ENV: &str = "RULXAI_SEED";

/// A failed command: message plus exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn compute(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_COMPUTE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_input_error() { EXIT_INPUT } else { EXIT_COMPUTE },
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    /// Score methods; the first one drives the selection.
    pub methods: Vec<String>,
    pub threshold: f64,
    pub max_features: Option<usize>,
    pub gbdt: GbdtConfig,
    pub rcit: RcitConfig,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            methods: vec!["pearson".into()],
            threshold: 0.01,
            max_features: None,
            gbdt: GbdtConfig::default(),
            rcit: RcitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsConfig {
    pub kinds: Vec<ModelKind>,
    pub tree: TreeSpec,
    pub figs: FigsSpec,
    pub ebm: EbmSpec,
    pub relu_dnn: ReluDnnSpec,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        ModelsConfig {
            kinds: ModelKind::ALL.to_vec(),
            tree: TreeSpec::default(),
            figs: FigsSpec::default(),
            ebm: EbmSpec::default(),
            relu_dnn: ReluDnnSpec::default(),
        }
    }
}

impl ModelsConfig {
    pub fn spec(&self, kind: ModelKind) -> ModelSpec {
        match kind {
            ModelKind::Tree => ModelSpec::Tree(self.tree.clone()),
            ModelKind::Figs => ModelSpec::Figs(self.figs.clone()),
            ModelKind::Ebm => ModelSpec::Ebm(self.ebm.clone()),
            ModelKind::ReluDnn => ModelSpec::ReluDnn(self.relu_dnn.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub methods: Vec<String>,
    pub sample: usize,
    /// Features for PDP/ALE; `None` means every model feature.
    pub features: Option<Vec<String>>,
    pub pfi_repeats: usize,
    pub grid_size: usize,
    pub ale_bins: usize,
    pub lime: LimeConfig,
    pub background_size: usize,
    pub max_shapley_features: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            methods: EXPLAIN_METHODS.iter().map(|s| s.to_string()).collect(),
            sample: 0,
            features: None,
            pfi_repeats: 10,
            grid_size: 100,
            ale_bins: 10,
            lime: LimeConfig::default(),
            background_size: explain::DEFAULT_BACKGROUND_SIZE,
            max_shapley_features: explain::DEFAULT_MAX_SHAPLEY_FEATURES,
        }
    }
}

const EXPLAIN_METHODS: [&str; 5] = ["pfi", "pdp", "ale", "lime", "shap"];
const INTERPRET_VIEWS: [&str; 5] = ["local", "parallel", "importance", "terms", "rules"];

/// Full pipeline configuration; every default reproduces the reference
/// pipeline (engine 1, 8:2 split, threshold 0.01, seed 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: Option<PathBuf>,
    pub format: Option<RecordFormat>,
    /// Engine to keep; `null` keeps every unit.
    pub unit: Option<u32>,
    pub normalize: bool,
    pub test_ratio: f64,
    pub selection: SelectionConfig,
    pub models: ModelsConfig,
    pub explain: ExplainConfig,
    pub diagnose: DiagnoseConfig,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data: None,
            format: None,
            unit: Some(1),
            normalize: true,
            test_ratio: 0.2,
            selection: SelectionConfig::default(),
            models: ModelsConfig::default(),
            explain: ExplainConfig::default(),
            diagnose: DiagnoseConfig::default(),
            out: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Propagates the global seed to every seeded component.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.selection.gbdt.seed = seed;
        self.selection.rcit.seed = seed;
        self.models.ebm.seed = seed;
        self.models.relu_dnn.seed = seed;
        self.explain.lime.seed = seed;
        self.diagnose.seed = seed;
        self.diagnose.conformal.seed = seed;
    }
}

/// Config file, then `RULXAI_SEED`, then the `--seed` flag.
pub fn load_config(path: Option<&Path>, seed_flag: Option<u64>) -> CliResult<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::input(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::input(format!("invalid config {}: {e}", p.display())))?
        }
        None => PipelineConfig::default(),
    };
    let mut seed = cfg.seed;
    if let Ok(v) = std::env::var(SEED_ENV) {
        seed = v
            .trim()
            .parse()
            .map_err(|_| Failure::input(format!("{SEED_ENV} must be an unsigned integer, got `{v}`")))?;
    }
    if let Some(s) = seed_flag {
        seed = s;
    }
    cfg.apply_seed(seed);
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFingerprint {
    pub rows: usize,
    pub columns: usize,
    /// FNV-1a over column names and every value, hex.
    pub column_hash: String,
}

pub fn fingerprint(ds: &TabularDataset) -> DatasetFingerprint {
    let mut bytes = Vec::new();
    for n in ds.feature_names() {
        bytes.extend_from_slice(n.as_bytes());
        bytes.push(0);
    }
    for v in ds.x().as_slice().iter().chain(ds.y()) {
        bytes.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    DatasetFingerprint {
        rows: ds.n_rows(),
        columns: ds.n_features(),
        column_hash: format!("{:016x}", stats::fnv1a(&bytes)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub wall_time_s: f64,
    pub completed_unix_s: u64,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
}

/// Run record kept at `<out>/manifest.json`; the only artifact holding
/// timings and timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: PipelineConfig,
    pub dataset: Option<DatasetFingerprint>,
    pub stages: BTreeMap<String, StageRecord>,
}

/// Dataset record written by `ingest`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub source: String,
    pub format: RecordFormat,
    pub unit: Option<u32>,
    pub n_rows: usize,
    pub n_features: usize,
    pub normalized: bool,
    pub test_ratio: f64,
    #[serde(flatten)]
    pub snapshot: DatasetSnapshot,
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Failure::compute(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::compute(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Failure::compute(e.to_string()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, hint: &str) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}; {hint}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("invalid {}: {e}", path.display())))
}

/// Collects the outputs of one stage and records them in the manifest.
struct Stage<'a> {
    cfg: &'a PipelineConfig,
    name: &'static str,
    outputs: Vec<String>,
    start: Instant,
}

impl<'a> Stage<'a> {
    fn new(cfg: &'a PipelineConfig, name: &'static str) -> Self {
        Stage {
            cfg,
            name,
            outputs: Vec::new(),
            start: Instant::now(),
        }
    }

    fn dir(&self) -> PathBuf {
        self.cfg.out.join(self.name)
    }

    /// Writes `rel` under the stage directory.
    fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
        write_file(&self.dir().join(rel), contents.as_ref())?;
        self.outputs.push(format!("{}/{rel}", self.name));
        Ok(())
    }

    fn finish(mut self, dataset: Option<DatasetFingerprint>) -> CliResult<()> {
        let path = self.cfg.out.join("manifest.json");
        let mut manifest = fs::read_to_string(&path)
            .ok()
            .and_then(|t| serde_json::from_str::<RunManifest>(&t).ok())
            .unwrap_or_else(|| RunManifest {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                config: self.cfg.clone(),
                dataset: None,
                stages: BTreeMap::new(),
            });
        manifest.tool_version = env!("CARGO_PKG_VERSION").to_string();
        manifest.config = self.cfg.clone();
        if dataset.is_some() {
            manifest.dataset = dataset;
        }
        self.outputs.sort();
        self.outputs.dedup();
        manifest.stages.insert(
            self.name.to_string(),
            StageRecord {
                wall_time_s: self.start.elapsed().as_secs_f64(),
                completed_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
                outputs: self.outputs,
            },
        );
        write_file(&path, to_json(&manifest)?.as_bytes())
    }
}

/// Per-task failures of a stage that otherwise completed.
#[derive(Default)]
struct TaskErrors(Vec<String>);

impl TaskErrors {
    fn record<T>(&mut self, task: impl std::fmt::Display, r: Result<T, Error>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                eprintln!("error: {task}: {e}");
                self.0.push(format!("{task}: {e}"));
                None
            }
        }
    }

    fn into_result(self, stage: &str) -> CliResult<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(Failure::compute(format!("{} {stage} task(s) failed", self.0.len())))
        }
    }
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn dataset_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.out.join("ingest").join("rows.json")
}

fn load_dataset(cfg: &PipelineConfig) -> CliResult<TabularDataset> {
    read_json(&dataset_path(cfg), "run `rulxai ingest` first")
}

fn model_path(cfg: &PipelineConfig, kind: ModelKind) -> PathBuf {
    cfg.out.join("train").join(format!("{kind}.json"))
}

/// Requested models (each must exist) or every trained model.
fn load_models(cfg: &PipelineConfig, kinds: &[ModelKind]) -> CliResult<Vec<FittedModel>> {
    let explicit = !kinds.is_empty();
    let wanted: Vec<ModelKind> = if explicit { kinds.to_vec() } else { ModelKind::ALL.to_vec() };
    let mut out = Vec::new();
    for kind in wanted {
        let path = model_path(cfg, kind);
        if !path.exists() {
            if explicit {
                return Err(Failure::input(format!("model file {} not found; run `rulxai train` first", path.display())));
            }
            continue;
        }
        out.push(FittedModel::load(&path)?);
    }
    if out.is_empty() {
        return Err(Failure::input(format!(
            "no model files in {}; run `rulxai train` first",
            cfg.out.join("train").display()
        )));
    }
    Ok(out)
}

fn model_dataset(ds: &TabularDataset, model: &FittedModel) -> CliResult<TabularDataset> {
    Ok(ds.with_features(&model.feature_names)?)
}

fn score_bars(table: &FeatureScoreTable, title: &str) -> String {
    let order = table.ranking();
    let labels: Vec<String> = order.iter().map(|&j| table.feature_names[j].clone()).collect();
    let values: Vec<f64> = order.iter().map(|&j| table.scores[j]).collect();
    plot::bar_chart(title, "score", &labels, &values)
}

fn attribution_bars(a: &Attribution, title: &str) -> String {
    let mut items: Vec<_> = a.features.iter().collect();
    items.sort_by(|x, y| y.value.abs().total_cmp(&x.value.abs()));
    let labels: Vec<String> = items.iter().map(|f| f.name.clone()).collect();
    let values: Vec<f64> = items.iter().map(|f| f.value).collect();
    plot::bar_chart(title, "contribution", &labels, &values)
}

fn curve_svg(title: &str, x_label: &str, y_label: &str, curves: &[&CurveSeries], names: &[&str]) -> String {
    let series: Vec<plot::Series> = curves
        .iter()
        .zip(names)
        .map(|(c, n)| plot::Series {
            name: n,
            x: &c.grid,
            y: &c.values,
        })
        .collect();
    plot::line_chart(title, x_label, y_label, &series)
}

fn record_format(cfg: &PipelineConfig, path: &Path) -> RecordFormat {
    cfg.format.unwrap_or_else(|| {
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            RecordFormat::Csv
        } else {
            RecordFormat::Whitespace
        }
    })
}

pub fn cmd_ingest(cfg: &PipelineConfig) -> CliResult<()> {
    let path = cfg
        .data
        .clone()
        .ok_or_else(|| Failure::input("no data file given; pass --data FILE or set `data` in the config"))?;
    let format = record_format(cfg, &path);
    let table = ingest::load_records(&path, format)?;
    let ds = ingest::build_dataset(
        &table,
        cfg.unit,
        cfg.normalize,
        SplitSpec {
            test_ratio: cfg.test_ratio,
            seed: cfg.seed,
        },
    )?;
    let manifest = DatasetManifest {
        source: path.display().to_string(),
        format,
        unit: cfg.unit,
        n_rows: ds.n_rows(),
        n_features: ds.n_features(),
        normalized: cfg.normalize,
        test_ratio: cfg.test_ratio,
        snapshot: ds.snapshot(),
    };
    let mut stage = Stage::new(cfg, "ingest");
    stage.write("dataset.json", to_json(&manifest)?)?;
    stage.write("rows.json", to_json(&ds)?)?;
    println!(
        "ingested {} rows ({} train, {} test), {} features from {}",
        ds.n_rows(),
        ds.n_train(),
        ds.n_test(),
        ds.n_features(),
        path.display()
    );
    stage.finish(Some(fingerprint(&ds)))
}

fn score_table(method: &str, ds: &TabularDataset, cfg: &PipelineConfig) -> Result<FeatureScoreTable, Error> {
    match method {
        "pearson" => feature_select::pearson_scores(ds),
        "dcor" => feature_select::distance_correlation(ds),
        "gbdt" => feature_select::gbdt_importance(ds, &cfg.selection.gbdt),
        "rcit" => feature_select::rcit_dependence(ds, &cfg.selection.rcit),
        other => Err(Error::InvalidArgument(format!(
            "unknown selection method `{other}` (expected pearson, dcor, gbdt or rcit)"
        ))),
    }
}

pub fn cmd_select(cfg: &PipelineConfig) -> CliResult<()> {
    if cfg.selection.methods.is_empty() {
        return Err(Failure::input("no selection method given"));
    }
    for m in &cfg.selection.methods {
        if !["pearson", "dcor", "gbdt", "rcit"].contains(&m.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "unknown selection method `{m}` (expected pearson, dcor, gbdt or rcit)"
            ))
            .into());
        }
    }
    let ds = load_dataset(cfg)?;
    let mut stage = Stage::new(cfg, "select");
    let mut selected = None;
    for method in &cfg.selection.methods {
        let mut table = score_table(method, &ds, cfg)?;
        table.threshold = Some(cfg.selection.threshold);
        stage.write(&format!("{method}_scores.csv"), table.to_csv())?;
        stage.write(&format!("{method}_scores.json"), to_json(&table)?)?;
        stage.write(
            &format!("{method}_scores.svg"),
            score_bars(&table, &format!("Feature scores ({})", table.method.as_str())),
        )?;
        if selected.is_none() {
            let mut names = feature_select::select_features(&table, cfg.selection.threshold)?;
            if let Some(k) = cfg.selection.max_features {
                names.truncate(k);
            }
            selected = Some(names);
        }
    }
    let eda = feature_select::eda_summary(&ds);
    stage.write("eda.json", to_json(&eda)?)?;
    stage.write("heatmap.json", to_json(&eda.correlation)?)?;
    stage.write(
        "heatmap.svg",
        plot::heatmap("Correlation heatmap", &eda.correlation.names, &eda.correlation.values),
    )?;
    stage.write(
        "cycle_rul.svg",
        plot::scatter("RUL against cycle", "cycle", "RUL", &[("rows", &eda.cycle_rul)]),
    )?;
    let selected = selected.unwrap_or_default();
    let mut text = selected.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    stage.write("selected_features.txt", text)?;
    if selected.is_empty() {
        eprintln!(
            "warning: no feature passes the threshold {}; the selection is empty",
            cfg.selection.threshold
        );
    } else {
        println!("selected {} features: {}", selected.len(), selected.join(", "));
    }
    stage.finish(Some(fingerprint(&ds)))
}

fn load_selection(cfg: &PipelineConfig) -> CliResult<Vec<String>> {
    let path = cfg.out.join("select").join("selected_features.txt");
    let text = fs::read_to_string(&path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}; run `rulxai select` first", path.display())))?;
    let names: Vec<String> = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
    if names.is_empty() {
        return Err(Failure::input(format!("{} lists no features", path.display())));
    }
    Ok(names)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn cmd_train(cfg: &PipelineConfig) -> CliResult<()> {
    let full = load_dataset(cfg)?;
    let selected = load_selection(cfg)?;
    let ds = full.with_features(&selected)?;
    if cfg.models.kinds.is_empty() {
        return Err(Failure::input("no model kind requested"));
    }
    let mut stage = Stage::new(cfg, "train");
    let mut csv = String::from("model,test_mse,train_mse,test_mae,train_mae,test_r2,train_r2,wall_time_s\n");
    let mut accuracy = BTreeMap::new();
    let mut errors = TaskErrors::default();
    for &kind in &cfg.models.kinds {
        let start = Instant::now();
        let Some(model) = errors.record(kind, models::fit(&cfg.models.spec(kind), &ds)) else {
            continue;
        };
        let secs = start.elapsed().as_secs_f64();
        let Some(acc) = errors.record(kind, diagnose::accuracy_report(&model, &ds)) else {
            continue;
        };
        stage.write(&format!("{kind}.json"), model.to_json()?)?;
        let _ = writeln!(
            csv,
            "{kind},{},{},{},{},{},{},{secs:.3}",
            acc.test.mse,
            acc.train.mse,
            acc.test.mae,
            acc.train.mae,
            opt(acc.test.r2),
            opt(acc.train.r2)
        );
        println!(
            "{kind}: test MSE {:.6}, test R2 {}, {secs:.1}s",
            acc.test.mse,
            acc.test.r2.map_or("n/a".into(), |r| format!("{r:.4}"))
        );
        accuracy.insert(kind.to_string(), acc);
    }
    if accuracy.is_empty() {
        return Err(Failure::compute("every model failed to train"));
    }
    stage.write("metrics.csv", csv)?;
    stage.write("accuracy.json", to_json(&accuracy)?)?;
    stage.finish(Some(fingerprint(&full)))?;
    if !errors.0.is_empty() {
        eprintln!("warning: {} model(s) failed; the others were written", errors.0.len());
    }
    Ok(())
}

fn efficiency_residual(a: &Attribution) -> f64 {
    let prediction = a.metadata.get("prediction").and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
    (a.total() - prediction).abs()
}

pub fn cmd_explain(cfg: &PipelineConfig, kinds: &[ModelKind]) -> CliResult<()> {
    let ex = &cfg.explain;
    for m in &ex.methods {
        if !EXPLAIN_METHODS.contains(&m.as_str()) {
            return Err(Failure::input(format!(
                "unknown explain method `{m}` (expected one of {})",
                EXPLAIN_METHODS.join(", ")
            )));
        }
    }
    let ds = load_dataset(cfg)?;
    let models = load_models(cfg, kinds)?;
    let want = |m: &str| ex.methods.iter().any(|x| x == m);
    let mut stage = Stage::new(cfg, "explain");
    let mut errors = TaskErrors::default();
    for model in &models {
        let kind = model.kind;
        let dsm = model_dataset(&ds, model)?;
        if want("pfi") {
            if let Some(t) = errors.record(
                format!("{kind} pfi"),
                explain::permutation_importance(model, &dsm, ex.pfi_repeats, cfg.seed),
            ) {
                stage.write(&format!("{kind}/pfi.csv"), t.to_csv())?;
                stage.write(&format!("{kind}/pfi.json"), to_json(&t)?)?;
                stage.write(&format!("{kind}/pfi.svg"), score_bars(&t, &format!("Permutation importance ({kind})")))?;
            }
        }
        let features = ex.features.clone().unwrap_or_else(|| model.feature_names.clone());
        let mut curves = Vec::new();
        for f in &features {
            let pdp = if want("pdp") {
                errors.record(
                    format!("{kind} pdp {f}"),
                    explain::partial_dependence(model, &dsm, f, ex.grid_size),
                )
            } else {
                None
            };
            let ale = if want("ale") {
                errors.record(
                    format!("{kind} ale {f}"),
                    explain::accumulated_local_effects(model, &dsm, f, ex.ale_bins),
                )
            } else {
                None
            };
            let stem = file_stem(f);
            let mut shown = Vec::new();
            let mut names = Vec::new();
            if let Some(c) = &pdp {
                stage.write(&format!("{kind}/pdp_{stem}.csv"), c.to_csv())?;
                shown.push(c);
                names.push("PDP");
            }
            if let Some(c) = &ale {
                stage.write(&format!("{kind}/ale_{stem}.csv"), c.to_csv())?;
                shown.push(c);
                names.push("ALE");
            }
            if !shown.is_empty() {
                stage.write(
                    &format!("{kind}/effects_{stem}.svg"),
                    curve_svg(&format!("Feature effect of {f} ({kind})"), f, "prediction", &shown, &names),
                )?;
            }
            curves.extend(pdp);
            curves.extend(ale);
        }
        if !curves.is_empty() {
            stage.write(&format!("{kind}/curves.json"), to_json(&curves)?)?;
        }
        let s = ex.sample;
        if want("lime") {
            if let Some(a) = errors.record(format!("{kind} lime"), explain::lime_explain(model, &dsm, s, &ex.lime)) {
                stage.write(&format!("{kind}/lime_{s}.json"), to_json(&a)?)?;
                stage.write(&format!("{kind}/lime_{s}.csv"), a.to_csv())?;
                stage.write(&format!("{kind}/lime_{s}.svg"), attribution_bars(&a, &format!("LIME, sample {s} ({kind})")))?;
            }
        }
        if want("shap") {
            let background = explain::default_background(&dsm, ex.background_size, cfg.seed);
            if let Some(mut a) = errors.record(
                format!("{kind} shap"),
                explain::shapley_exact(model, &dsm, s, &background, ex.max_shapley_features),
            ) {
                let residual = efficiency_residual(&a);
                a.metadata.insert("efficiency_residual".into(), residual.into());
                stage.write(&format!("{kind}/shap_{s}.json"), to_json(&a)?)?;
                stage.write(&format!("{kind}/shap_{s}.csv"), a.to_csv())?;
                stage.write(&format!("{kind}/shap_{s}.svg"), attribution_bars(&a, &format!("SHAP, sample {s} ({kind})")))?;
            }
        }
    }
    stage.finish(None)?;
    errors.into_result("explain")
}

fn shape_curve(term: &interpret::EbmTermView, ds: &TabularDataset) -> CurveSeries {
    let col = ds.train_column(term.features[0]);
    let lo = stats::min_max(&col).0.min(term.bin_edges.first().copied().unwrap_or(0.0));
    let mut grid = vec![lo];
    grid.extend(&term.bin_edges);
    CurveSeries::new(term.term.clone(), CurveKind::Shape, grid, term.contributions.clone())
}

pub fn cmd_interpret(cfg: &PipelineConfig, kinds: &[ModelKind], views: &[String], sample: usize) -> CliResult<()> {
    for v in views {
        if !INTERPRET_VIEWS.contains(&v.as_str()) {
            return Err(Failure::input(format!(
                "unknown view `{v}` (expected one of {})",
                INTERPRET_VIEWS.join(", ")
            )));
        }
    }
    let ds = load_dataset(cfg)?;
    let models = load_models(cfg, kinds)?;
    let explicit = !views.is_empty();
    let mut stage = Stage::new(cfg, "interpret");
    let mut errors = TaskErrors::default();
    for model in &models {
        let kind = model.kind;
        let dsm = model_dataset(&ds, model)?;
        let applicable: &[&str] = match kind {
            ModelKind::ReluDnn => &["local", "parallel", "importance"],
            ModelKind::Ebm => &["local", "terms", "importance"],
            ModelKind::Tree | ModelKind::Figs => &["local", "rules"],
        };
        let want = |v: &str| if explicit { views.iter().any(|x| x == v) } else { applicable.contains(&v) };
        for v in views {
            if !applicable.contains(&v.as_str()) {
                errors.record::<()>(
                    format!("{kind} {v}"),
                    Err(Error::WrongModelKind {
                        expected: format!("a model supporting the `{v}` view"),
                        found: kind.to_string(),
                    }),
                );
            }
        }
        if want("local") {
            if let Some(a) = errors.record(format!("{kind} local"), interpret::local_contribution(model, &dsm, sample)) {
                stage.write(&format!("{kind}/local_{sample}.json"), to_json(&a)?)?;
                stage.write(&format!("{kind}/local_{sample}.csv"), a.to_csv())?;
                stage.write(
                    &format!("{kind}/local_{sample}.svg"),
                    attribution_bars(&a, &format!("Intrinsic contributions, sample {sample} ({kind})")),
                )?;
            }
        }
        match kind {
            ModelKind::ReluDnn if want("parallel") || want("importance") => {
                let Some(llms) = errors.record(format!("{kind} llm"), interpret::extract_llms(model, &dsm)) else {
                    continue;
                };
                stage.write(&format!("{kind}/llms.json"), to_json(&llms)?)?;
                if want("importance") {
                    if let Some(t) = errors.record(format!("{kind} importance"), interpret::llm_feature_importance(&llms, &dsm)) {
                        stage.write(&format!("{kind}/llm_importance.csv"), t.to_csv())?;
                        stage.write(&format!("{kind}/llm_importance.json"), to_json(&t)?)?;
                        stage.write(&format!("{kind}/llm_importance.svg"), score_bars(&t, "LLM feature importance"))?;
                    }
                }
                if want("parallel") {
                    if let Some(v) = errors.record(
                        format!("{kind} parallel"),
                        interpret::llm_coefficient_views(&llms, dsm.feature_names()),
                    ) {
                        stage.write(&format!("{kind}/llm_coefficients.csv"), v.to_csv())?;
                        stage.write(&format!("{kind}/llm_summary.json"), to_json(&v.summaries)?)?;
                        stage.write(
                            &format!("{kind}/parallel.svg"),
                            plot::parallel_coordinates(
                                "LLM coefficients",
                                &v.feature_names,
                                &v.polylines,
                                "coefficient",
                            ),
                        )?;
                    }
                }
            }
            ModelKind::Ebm if want("terms") || want("importance") => {
                let Some(terms) = errors.record(format!("{kind} terms"), interpret::ebm_terms(model, &dsm)) else {
                    continue;
                };
                if want("terms") {
                    stage.write(&format!("{kind}/terms.json"), to_json(&terms)?)?;
                    for t in terms.iter().filter(|t| !t.is_pair()) {
                        let c = shape_curve(t, &dsm);
                        stage.write(
                            &format!("{kind}/shape_{}.svg", file_stem(&t.term)),
                            curve_svg(&format!("Shape function of {}", t.term), &t.term, "contribution", &[&c], &["shape"]),
                        )?;
                    }
                }
                if want("importance") {
                    let labels: Vec<String> = terms.iter().map(|t| t.term.clone()).collect();
                    let values: Vec<f64> = terms.iter().map(|t| t.importance).collect();
                    let mut csv = String::from("term,importance\n");
                    for (l, v) in labels.iter().zip(&values) {
                        let _ = writeln!(csv, "{l},{v}");
                    }
                    stage.write(&format!("{kind}/term_importance.csv"), csv)?;
                    stage.write(
                        &format!("{kind}/term_importance.svg"),
                        plot::bar_chart("EBM term importance", "mean |contribution|", &labels, &values),
                    )?;
                }
            }
            ModelKind::Tree | ModelKind::Figs if want("rules") => {
                if let Some(rules) = errors.record(format!("{kind} rules"), interpret::tree_structure(model)) {
                    stage.write(&format!("{kind}/rules.json"), to_json(&rules)?)?;
                    let mut text = String::new();
                    for r in &rules.rules {
                        let _ = writeln!(text, "{}", r.describe());
                    }
                    stage.write(&format!("{kind}/rules.txt"), text)?;
                }
            }
            _ => {}
        }
    }
    stage.finish(None)?;
    errors.into_result("interpret")
}

fn write_diagnostics(stage: &mut Stage, r: &DiagnosticsReport) -> CliResult<()> {
    let kind = &r.model;
    stage.write(&format!("{kind}/diagnostics.json"), to_json(r)?)?;
    stage.write(&format!("{kind}/residuals.csv"), r.residuals.to_csv())?;
    stage.write(
        &format!("{kind}/residuals.svg"),
        plot::scatter(
            &format!("Residuals ({kind})"),
            "prediction",
            "residual",
            &[("train", &r.residuals.train), ("test", &r.residuals.test)],
        ),
    )?;
    if let Some(o) = &r.overfit {
        let mut csv = String::from("lower,upper,n_train,n_test,train_mse,test_mse,gap,flagged\n");
        for b in &o.bins {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{}",
                b.lower,
                b.upper,
                b.n_train,
                b.n_test,
                opt(b.train_mse),
                opt(b.test_mse),
                opt(b.gap),
                b.flagged
            );
        }
        stage.write(&format!("{kind}/overfit.csv"), csv)?;
    }
    if let Some(b) = &r.reliability {
        stage.write(&format!("{kind}/reliability.json"), to_json(b)?)?;
        let labels: Vec<String> = (1..=b.segmented.len()).map(|k| format!("decile {k}")).collect();
        let values: Vec<f64> = b.segmented.iter().map(|s| s.bandwidth).collect();
        stage.write(
            &format!("{kind}/bandwidth.svg"),
            plot::bar_chart(&format!("Conformal bandwidth by prediction decile ({kind})"), "bandwidth", &labels, &values),
        )?;
    }
    if let Some(c) = &r.robustness {
        stage.write(&format!("{kind}/robustness.csv"), c.to_csv())?;
    }
    if let Some(res) = &r.resilience {
        stage.write(&format!("{kind}/resilience.csv"), res.curve.to_csv())?;
        let mut csv = String::from("feature,worst_mean,full_mean,standardized_difference\n");
        for s in &res.shift {
            let _ = writeln!(csv, "{},{},{},{}", s.feature, s.worst_mean, s.full_mean, s.standardized_difference);
        }
        stage.write(&format!("{kind}/shift.csv"), csv)?;
    }
    Ok(())
}

pub fn cmd_diagnose(cfg: &PipelineConfig, kinds: &[ModelKind], tests: &[DiagnosticTest]) -> CliResult<()> {
    let ds = load_dataset(cfg)?;
    let models = load_models(cfg, kinds)?;
    let tests: Vec<DiagnosticTest> = if tests.is_empty() { DiagnosticTest::ALL.to_vec() } else { tests.to_vec() };
    let mut stage = Stage::new(cfg, "diagnose");
    let mut errors = TaskErrors::default();
    let mut reports = Vec::new();
    for model in &models {
        let dsm = model_dataset(&ds, model)?;
        let Some(r) = errors.record(model.kind, diagnose::run_diagnostics(model, &dsm, &tests, &cfg.diagnose)) else {
            continue;
        };
        for (test, msg) in &r.errors {
            eprintln!("error: {} {test}: {msg}", model.kind);
            errors.0.push(format!("{} {test}: {msg}", model.kind));
        }
        write_diagnostics(&mut stage, &r)?;
        reports.push(r);
    }
    let mut csv = String::from("model,train_mse,test_mse,gap_mse,train_mae,test_mae,train_r2,test_r2\n");
    for r in &reports {
        let a = &r.accuracy;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.model,
            a.train.mse,
            a.test.mse,
            a.gap.mse,
            a.train.mae,
            a.test.mae,
            opt(a.train.r2),
            opt(a.test.r2)
        );
    }
    stage.write("accuracy.csv", csv)?;
    let names: Vec<&str> = reports.iter().map(|r| r.model.as_str()).collect();
    let robust: Vec<(&CurveSeries, &str)> = reports
        .iter()
        .filter_map(|r| r.robustness.as_ref().map(|c| (c, r.model.as_str())))
        .collect();
    if !robust.is_empty() {
        let (c, n): (Vec<_>, Vec<_>) = robust.into_iter().unzip();
        stage.write("robustness.svg", curve_svg("Robustness under feature noise", "noise scale", "test MSE", &c, &n))?;
    }
    let resil: Vec<(&CurveSeries, &str)> = reports
        .iter()
        .filter_map(|r| r.resilience.as_ref().map(|x| (&x.curve, r.model.as_str())))
        .collect();
    if !resil.is_empty() {
        let (c, n): (Vec<_>, Vec<_>) = resil.into_iter().unzip();
        stage.write("resilience.svg", curve_svg("Resilience on worst subsamples", "worst-sample ratio", "MSE", &c, &n))?;
    }
    if !names.is_empty() {
        println!("diagnosed {}", names.join(", "));
    }
    stage.finish(None)?;
    errors.into_result("diagnose")
}

fn list_files(dir: &Path, root: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let Ok(entries) = fs::read_dir(dir) else {
        return out;
    };
    for e in entries.flatten() {
        let p = e.path();
        if p.is_dir() {
            out.extend(list_files(&p, root));
        } else if let Ok(rel) = p.strip_prefix(root) {
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    out.sort();
    out
}

fn links(out: &mut String, files: &[String], filter: impl Fn(&str) -> bool) {
    for f in files.iter().filter(|f| filter(f)) {
        let _ = writeln!(out, "- [{f}]({f})");
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.6}"))
}

/// Assembles `<out>/report.md` from whatever stage outputs exist.
pub fn cmd_report(cfg: &PipelineConfig) -> CliResult<()> {
    let root = &cfg.out;
    if !["ingest", "select", "train", "explain", "interpret", "diagnose"]
        .iter()
        .any(|s| root.join(s).is_dir())
    {
        return Err(Failure::input(format!("no stage outputs under {}; run a pipeline stage first", root.display())));
    }
    let mut md = String::from("# RUL pipeline report\n\n");
    let manifest: Option<RunManifest> = read_json(&root.join("manifest.json"), "").ok();
    let _ = writeln!(md, "Run details (configuration, timings, outputs): [manifest.json](manifest.json)\n");
    if let Some(m) = &manifest {
        let _ = writeln!(md, "- tool version: {}", m.tool_version);
        let _ = writeln!(md, "- seed: {}", m.config.seed);
        if let Some(d) = &m.dataset {
            let _ = writeln!(md, "- dataset: {} rows, {} columns, hash {}", d.rows, d.columns, d.column_hash);
        }
        md.push('\n');
    }

    md.push_str("## 1. Data\n\n");
    match read_json::<DatasetManifest>(&root.join("ingest/dataset.json"), "") {
        Ok(d) => {
            let _ = writeln!(md, "- source: `{}`", d.source);
            let _ = writeln!(
                md,
                "- unit: {}",
                d.unit.map_or("all".to_string(), |u| u.to_string())
            );
            let _ = writeln!(
                md,
                "- rows: {} ({} train, {} test), features: {}",
                d.n_rows, d.snapshot.n_train, d.snapshot.n_test, d.n_features
            );
            let _ = writeln!(md, "- split seed: {}, normalized: {}", d.snapshot.seed, d.normalized);
            md.push_str("- [ingest/dataset.json](ingest/dataset.json)\n\n");
        }
        Err(_) => md.push_str("not run\n\n"),
    }

    md.push_str("## 2. Feature selection\n\n");
    let files = list_files(&root.join("select"), root);
    if files.is_empty() {
        md.push_str("not run\n\n");
    } else {
        if let Ok(text) = fs::read_to_string(root.join("select/selected_features.txt")) {
            let names: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
            let _ = writeln!(
                md,
                "Selected features ({}): {}\n",
                names.len(),
                if names.is_empty() { "none".to_string() } else { names.join(", ") }
            );
        }
        links(&mut md, &files, |f| f.ends_with(".csv") || f.ends_with(".svg") || f.ends_with(".txt"));
        md.push('\n');
    }

    md.push_str("## 3. Models\n\n");
    match read_json::<BTreeMap<String, diagnose::AccuracyReport>>(&root.join("train/accuracy.json"), "") {
        Ok(acc) => {
            md.push_str("| model | test MSE | train MSE | test MAE | train MAE | test R2 | train R2 |\n");
            md.push_str("|---|---|---|---|---|---|---|\n");
            for kind in ModelKind::ALL {
                if let Some(a) = acc.get(kind.as_str()) {
                    let _ = writeln!(
                        md,
                        "| {kind} | {:.6} | {:.6} | {:.6} | {:.6} | {} | {} |",
                        a.test.mse,
                        a.train.mse,
                        a.test.mae,
                        a.train.mae,
                        fmt_opt(a.test.r2),
                        fmt_opt(a.train.r2)
                    );
                }
            }
            md.push('\n');
            links(&mut md, &list_files(&root.join("train"), root), |f| f.ends_with(".json") || f.ends_with(".csv"));
            md.push('\n');
        }
        Err(_) => md.push_str("not run\n\n"),
    }

    for (n, stage, title) in [(4, "explain", "Explanations"), (5, "interpret", "Interpretability")] {
        let _ = writeln!(md, "## {n}. {title}\n");
        let files = list_files(&root.join(stage), root);
        if files.is_empty() {
            md.push_str("not run\n\n");
            continue;
        }
        for kind in ModelKind::ALL {
            let prefix = format!("{stage}/{kind}/");
            let mine: Vec<String> = files.iter().filter(|f| f.starts_with(&prefix)).cloned().collect();
            if mine.is_empty() {
                continue;
            }
            let _ = writeln!(md, "### {kind}\n");
            links(&mut md, &mine, |f| f.ends_with(".svg") || f.ends_with(".json") || f.ends_with(".txt"));
            md.push('\n');
        }
    }

    md.push_str("## 6. Diagnostics\n\n");
    let files = list_files(&root.join("diagnose"), root);
    if files.is_empty() {
        md.push_str("not run\n\n");
    } else {
        md.push_str("| model | train MSE | test MSE | gap | conformal q | coverage | robustness at max noise |\n");
        md.push_str("|---|---|---|---|---|---|---|\n");
        for kind in ModelKind::ALL {
            let Ok(r) = read_json::<DiagnosticsReport>(&root.join(format!("diagnose/{kind}/diagnostics.json")), "") else {
                continue;
            };
            let a = &r.accuracy;
            let _ = writeln!(
                md,
                "| {kind} | {:.6} | {:.6} | {:.6} | {} | {} | {} |",
                a.train.mse,
                a.test.mse,
                a.gap.mse,
                fmt_opt(r.reliability.as_ref().map(|b| b.q_hat)),
                fmt_opt(r.reliability.as_ref().map(|b| b.coverage)),
                fmt_opt(r.robustness.as_ref().and_then(|c| c.values.last().copied()))
            );
        }
        md.push('\n');
        links(&mut md, &files, |f| f.ends_with(".svg") || f.ends_with(".csv"));
        md.push('\n');
    }

    let path = root.join("report.md");
    write_file(&path, md.as_bytes())?;
    let mut stage = Stage::new(cfg, "report");
    stage.outputs.push("report.md".into());
    println!("wrote {}", path.display());
    stage.finish(None)
}

pub fn cmd_simulate(output: &Path, cfg: &SurrogateConfig) -> CliResult<()> {
    let table = simulate::generate(cfg)?;
    write_file(output, table.to_whitespace().as_bytes())?;
    println!("wrote {} records for {} units to {}", table.len(), cfg.units, output.display());
    Ok(())
}

#[derive(Debug, Parser)]
#[command(name = "rulxai", version, about = "Explainable remaining-useful-life modelling pipeline")]
pub struct Cli {
    /// JSON configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default `out`)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Global seed; overrides the config file and RULXAI_SEED
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse trajectories, derive RUL, split and normalize
    Ingest(IngestArgs),
    /// Score features and write the selected feature list
    Select(SelectArgs),
    /// Train models on the selected features
    Train(TrainArgs),
    /// Post-hoc explanations: PFI, PDP, ALE, LIME, SHAP
    Explain(ExplainArgs),
    /// Intrinsic interpretation: local linear models, EBM terms, rules
    Interpret(InterpretArgs),
    /// Accuracy, overfit, reliability, robustness and resilience tests
    Diagnose(DiagnoseArgs),
    /// Assemble the markdown report from existing stage outputs
    Report,
    /// Run every stage in order
    Run(IngestArgs),
    /// Write a synthetic run-to-failure data file in the 26-column layout
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Trajectory file (whitespace-delimited or CSV with header)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// `whitespace` or `csv`; inferred from the extension by default
    #[arg(long)]
    pub format: Option<String>,
    /// Engine unit to keep (default 1)
    #[arg(long)]
    pub unit: Option<u32>,
    /// Keep every unit
    #[arg(long, conflicts_with = "unit")]
    pub all_units: bool,
    #[arg(long)]
    pub test_ratio: Option<f64>,
    /// Skip min-max scaling
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// pearson, dcor, gbdt, rcit (comma separated; the first drives selection)
    #[arg(long, value_delimiter = ',')]
    pub method: Vec<String>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Keep at most this many of the highest-scoring features
    #[arg(long)]
    pub max_features: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// tree, figs, ebm, relu_dnn (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long, value_delimiter = ',')]
    pub model: Vec<String>,
    /// pfi, pdp, ale, lime, shap (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub method: Vec<String>,
    #[arg(long)]
    pub sample: Option<usize>,
    /// Features for PDP/ALE (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub feature: Vec<String>,
    /// Largest feature count for exact Shapley values
    #[arg(long)]
    pub max_shapley_features: Option<usize>,
}

#[derive(Debug, Args)]
pub struct InterpretArgs {
    #[arg(long, value_delimiter = ',')]
    pub model: Vec<String>,
    /// local, parallel, importance, terms, rules (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub view: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub sample: usize,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long, value_delimiter = ',')]
    pub model: Vec<String>,
    /// accuracy, overfit, reliability, robustness, resilience (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub test: Vec<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub calib_fraction: Option<f64>,
    /// Feature for overfit slicing
    #[arg(long)]
    pub feature: Option<String>,
    #[arg(long)]
    pub repeats: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub units: u32,
    /// Cycles of engine 1
    #[arg(long, default_value_t = 223)]
    pub cycles: u32,
    #[arg(long, default_value_t = 2008)]
    pub data_seed: u64,
}

fn parse_kinds(names: &[String]) -> CliResult<Vec<ModelKind>> {
    Ok(names.iter().map(|n| n.parse()).collect::<Result<Vec<ModelKind>, _>>()?)
}

fn apply_ingest(cfg: &mut PipelineConfig, a: &IngestArgs) -> CliResult<()> {
    if let Some(d) = &a.data {
        cfg.data = Some(d.clone());
    }
    if let Some(f) = &a.format {
        cfg.format = Some(f.parse()?);
    }
    if let Some(u) = a.unit {
        cfg.unit = Some(u);
    }
    if a.all_units {
        cfg.unit = None;
    }
    if let Some(r) = a.test_ratio {
        cfg.test_ratio = r;
    }
    if a.no_normalize {
        cfg.normalize = false;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let mut cfg = load_config(cli.config.as_deref(), cli.seed)?;
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    match cli.command {
        Command::Ingest(a) => {
            apply_ingest(&mut cfg, &a)?;
            cmd_ingest(&cfg)
        }
        Command::Select(a) => {
            if !a.method.is_empty() {
                cfg.selection.methods = a.method;
            }
            if let Some(t) = a.threshold {
                cfg.selection.threshold = t;
            }
            if a.max_features.is_some() {
                cfg.selection.max_features = a.max_features;
            }
            cmd_select(&cfg)
        }
        Command::Train(a) => {
            if !a.models.is_empty() {
                cfg.models.kinds = parse_kinds(&a.models)?;
            }
            cmd_train(&cfg)
        }
        Command::Explain(a) => {
            let kinds = parse_kinds(&a.model)?;
            if !a.method.is_empty() {
                cfg.explain.methods = a.method;
            }
            if let Some(s) = a.sample {
                cfg.explain.sample = s;
            }
            if !a.feature.is_empty() {
                cfg.explain.features = Some(a.feature);
            }
            if let Some(m) = a.max_shapley_features {
                cfg.explain.max_shapley_features = m;
            }
            cmd_explain(&cfg, &kinds)
        }
        Command::Interpret(a) => {
            let kinds = parse_kinds(&a.model)?;
            cmd_interpret(&cfg, &kinds, &a.view, a.sample)
        }
        Command::Diagnose(a) => {
            let kinds = parse_kinds(&a.model)?;
            let tests = a.test.iter().map(|t| t.parse()).collect::<Result<Vec<DiagnosticTest>, _>>()?;
            if let Some(x) = a.alpha {
                cfg.diagnose.conformal.alpha = x;
            }
            if let Some(x) = a.calib_fraction {
                cfg.diagnose.conformal.calib_fraction = x;
            }
            if a.feature.is_some() {
                cfg.diagnose.overfit_feature = a.feature;
            }
            if let Some(r) = a.repeats {
                cfg.diagnose.robustness_repeats = r;
            }
            cmd_diagnose(&cfg, &kinds, &tests)
        }
        Command::Report => cmd_report(&cfg),
        Command::Run(a) => {
            apply_ingest(&mut cfg, &a)?;
            run_pipeline(&cfg)
        }
        Command::Simulate(a) => cmd_simulate(
            &a.output,
            &SurrogateConfig {
                units: a.units,
                engine1_cycles: a.cycles,
                seed: a.data_seed,
                ..SurrogateConfig::default()
            },
        ),
    }
}

/// Every stage in order. Later stages still run after per-task failures;
/// the first failure decides the exit code.
pub fn run_pipeline(cfg: &PipelineConfig) -> CliResult<()> {
    cmd_ingest(cfg)?;
    cmd_select(cfg)?;
    cmd_train(cfg)?;
    let mut first = None;
    for r in [
        cmd_explain(cfg, &[]),
        cmd_interpret(cfg, &[], &[], cfg.explain.sample),
        cmd_diagnose(cfg, &[], &[]),
    ] {
        if let Err(e) = r {
            first.get_or_insert(e);
        }
    }
    cmd_report(cfg)?;
    first.map_or(Ok(()), Err)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_round_trip() {
        let cfg = PipelineConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: PipelineConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        let partial: PipelineConfig = serde_json::from_str(r#"{"test_ratio": 0.3, "models": {"tree": {"max_depth": 3}}}"#).unwrap();
        assert_eq!(partial.models.tree.max_depth, 3);
        assert_eq!(partial.models.tree.min_samples_leaf, 5);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"tes_ratio": 0.3}"#).is_err());
    }

    #[test]
    fn seed_propagates() {
        let mut cfg = PipelineConfig::default();
        cfg.apply_seed(7);
        assert_eq!(cfg.models.ebm.seed, 7);
        assert_eq!(cfg.diagnose.conformal.seed, 7);
    }

    #[test]
    fn file_stems_are_safe() {
        assert_eq!(file_stem("s2 & cycle"), "s2___cycle");
    }
}
