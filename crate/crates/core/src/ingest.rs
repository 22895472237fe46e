//! Loading PHM08-style trajectories, RUL derivation and dataset assembly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::stats;

pub const SETTING_COUNT: usize = 3;
pub const SENSOR_COUNT: usize = 21;
/// unit, cycle, 3 settings, 21 sensors.
pub const FIELD_COUNT: usize = 2 + SETTING_COUNT + SENSOR_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    Whitespace,
    Csv,
}

impl std::str::FromStr for RecordFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whitespace" | "txt" => Ok(RecordFormat::Whitespace),
            "csv" => Ok(RecordFormat::Csv),
            other => Err(Error::InvalidArgument(format!("unknown record format `{other}`"))),
        }
    }
}

/// One time step of one engine.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub unit: u32,
    pub cycle: u32,
    pub settings: [f64; SETTING_COUNT],
    pub sensors: [f64; SENSOR_COUNT],
}

impl RawRecord {
    /// The 25 model features in canonical order: cycle, settings, sensors.
    pub fn features(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(f64::from(self.cycle))
            .chain(self.settings.iter().copied())
            .chain(self.sensors.iter().copied())
    }
}

/// Validated trajectory table, optionally carrying a derived RUL column.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecordTable {
    records: Vec<RawRecord>,
    rul: Option<Vec<f64>>,
}

/// Column names in file order.
pub fn column_names() -> Vec<String> {
    let mut names = vec!["unit".to_string(), "cycle".to_string()];
    names.extend((1..=SETTING_COUNT).map(|i| format!("setting{i}")));
    names.extend((1..=SENSOR_COUNT).map(|i| format!("s{i}")));
    names
}

/// Model feature names: every column except the unit id.
pub fn feature_names() -> Vec<String> {
    column_names().into_iter().skip(1).collect()
}

impl RawRecordTable {
    /// Validates per-unit cycle ordering. `lines` gives the source line of
    /// each record for error reporting.
    fn from_parsed(records: Vec<RawRecord>, lines: &[usize]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Empty("no records".into()));
        }
        let mut last: BTreeMap<u32, u32> = BTreeMap::new();
        for (rec, &line) in records.iter().zip(lines) {
            if let Some(&prev) = last.get(&rec.unit) {
                if rec.cycle <= prev {
                    return Err(Error::Parse {
                        line,
                        message: format!(
                            "unit {} cycle {} does not increase (previous {})",
                            rec.unit, rec.cycle, prev
                        ),
                    });
                }
            }
            last.insert(rec.unit, rec.cycle);
        }
        Ok(RawRecordTable { records, rul: None })
    }

    /// Builds a table from records already in memory.
    pub fn from_records(records: Vec<RawRecord>) -> Result<Self> {
        let lines: Vec<usize> = (1..=records.len()).collect();
        Self::from_parsed(records, &lines)
    }

    pub fn records(&self) -> &[RawRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn rul(&self) -> Option<&[f64]> {
        self.rul.as_deref()
    }

    pub fn units(&self) -> Vec<u32> {
        let mut u: Vec<u32> = self.records.iter().map(|r| r.unit).collect();
        u.sort_unstable();
        u.dedup();
        u
    }

    /// Writes the table in the whitespace layout.
    pub fn to_whitespace(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&format!("{} {}", r.unit, r.cycle));
            for v in r.settings.iter().chain(r.sensors.iter()) {
                out.push_str(&format!(" {v}"));
            }
            out.push('\n');
        }
        out
    }
}

fn parse_number(tok: &str, line: usize, column: &str) -> Result<f64> {
    let v: f64 = tok.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("column `{column}`: `{tok}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("column `{column}`: non-finite value `{tok}`"),
        });
    }
    Ok(v)
}

fn parse_id(v: f64, line: usize, column: &str) -> Result<u32> {
    if v < 1.0 || v.fract() != 0.0 || v > f64::from(u32::MAX) {
        return Err(Error::Parse {
            line,
            message: format!("column `{column}`: expected a positive integer, found {v}"),
        });
    }
    Ok(v as u32)
}

fn record_from_values(values: &[f64], line: usize) -> Result<RawRecord> {
    let mut settings = [0.0; SETTING_COUNT];
    settings.copy_from_slice(&values[2..2 + SETTING_COUNT]);
    let mut sensors = [0.0; SENSOR_COUNT];
    sensors.copy_from_slice(&values[2 + SETTING_COUNT..]);
    Ok(RawRecord {
        unit: parse_id(values[0], line, "unit")?,
        cycle: parse_id(values[1], line, "cycle")?,
        settings,
        sensors,
    })
}

/// Parses records from text in the given format.
pub fn parse_records(text: &str, format: RecordFormat) -> Result<RawRecordTable> {
    match format {
        RecordFormat::Whitespace => parse_whitespace(text),
        RecordFormat::Csv => parse_csv(text),
    }
}

fn parse_whitespace(text: &str) -> Result<RawRecordTable> {
    let names = column_names();
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != FIELD_COUNT {
            return Err(Error::Parse {
                line,
                message: format!("expected {FIELD_COUNT} fields, found {}", toks.len()),
            });
        }
        let values = toks
            .iter()
            .zip(&names)
            .map(|(t, n)| parse_number(t, line, n))
            .collect::<Result<Vec<_>>>()?;
        records.push(record_from_values(&values, line)?);
        lines.push(line);
    }
    RawRecordTable::from_parsed(records, &lines)
}

fn parse_csv(text: &str) -> Result<RawRecordTable> {
    let names = column_names();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(Error::Empty("csv has no header".into()));
    }
    let positions = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h.eq_ignore_ascii_case(n))
                .ok_or_else(|| Error::Parse {
                    line: 1,
                    message: format!("missing column `{n}` in header"),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), row.len()),
            });
        }
        let values = positions
            .iter()
            .zip(&names)
            .map(|(&p, n)| parse_number(&row[p], line, n))
            .collect::<Result<Vec<_>>>()?;
        records.push(record_from_values(&values, line)?);
        lines.push(line);
    }
    RawRecordTable::from_parsed(records, &lines)
}

/// Reads and validates a record file.
pub fn load_records(path: impl AsRef<Path>, format: RecordFormat) -> Result<RawRecordTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Err(Error::Empty(format!("{} contains no records", path.display())));
    }
    parse_records(&text, format)
}

/// Appends RUL = (max cycle of the unit) - cycle to every record.
pub fn derive_rul(mut table: RawRecordTable) -> RawRecordTable {
    let mut max_cycle: BTreeMap<u32, u32> = BTreeMap::new();
    for r in &table.records {
        let e = max_cycle.entry(r.unit).or_insert(r.cycle);
        *e = (*e).max(r.cycle);
    }
    let rul = table
        .records
        .iter()
        .map(|r| f64::from(max_cycle[&r.unit] - r.cycle))
        .collect();
    table.rul = Some(rul);
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_ratio: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_ratio: 0.2,
            seed: 0,
        }
    }
}

/// Min-max ranges fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    /// `(min, max)` per feature column.
    pub features: Vec<(f64, f64)>,
    /// `(min, max)` of the RUL target.
    pub target: (f64, f64),
}

fn scale(v: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

impl Scaler {
    /// Maps a scaled target back to cycles.
    pub fn unscale_target(&self, v: f64) -> f64 {
        let (lo, hi) = self.target;
        lo + v * (hi - lo)
    }
}

/// Feature matrix, target and split masks for one modelling problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularDataset {
    feature_names: Vec<String>,
    x: Matrix,
    y: Vec<f64>,
    unit_ids: Vec<u32>,
    scaler: Option<Scaler>,
    train_mask: Vec<bool>,
    test_mask: Vec<bool>,
    seed: u64,
}

/// Reproducibility record for a built dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSnapshot {
    pub feature_names: Vec<String>,
    pub scaler: Option<Scaler>,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl TabularDataset {
    /// Assembles a dataset from parts; rows not in `train_mask` form the
    /// test split.
    pub fn new(
        feature_names: Vec<String>,
        x: Matrix,
        y: Vec<f64>,
        train_mask: Vec<bool>,
    ) -> Result<Self> {
        let n = x.nrows();
        if feature_names.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                found: feature_names.len(),
            });
        }
        if y.len() != n || train_mask.len() != n {
            return Err(Error::InvalidArgument(format!(
                "x has {n} rows but y has {} and the mask {}",
                y.len(),
                train_mask.len()
            )));
        }
        if x.as_slice().iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("dataset contains non-finite values".into()));
        }
        let test_mask = train_mask.iter().map(|t| !t).collect();
        Ok(TabularDataset {
            feature_names,
            x,
            y,
            unit_ids: vec![1; n],
            scaler: None,
            train_mask,
            test_mask,
            seed: 0,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn unit_ids(&self) -> &[u32] {
        &self.unit_ids
    }

    pub fn scaler(&self) -> Option<&Scaler> {
        self.scaler.as_ref()
    }

    pub fn train_mask(&self) -> &[bool] {
        &self.train_mask
    }

    pub fn test_mask(&self) -> &[bool] {
        &self.test_mask
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn train_indices(&self) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.train_mask[i]).collect()
    }

    pub fn test_indices(&self) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.test_mask[i]).collect()
    }

    pub fn n_train(&self) -> usize {
        self.train_mask.iter().filter(|&&t| t).count()
    }

    pub fn n_test(&self) -> usize {
        self.n_rows() - self.n_train()
    }

    pub fn train_x(&self) -> Matrix {
        self.x.select_rows(&self.train_indices())
    }

    pub fn test_x(&self) -> Matrix {
        self.x.select_rows(&self.test_indices())
    }

    pub fn train_y(&self) -> Vec<f64> {
        self.train_indices().iter().map(|&i| self.y[i]).collect()
    }

    pub fn test_y(&self) -> Vec<f64> {
        self.test_indices().iter().map(|&i| self.y[i]).collect()
    }

    /// Training-split values of feature `j`.
    pub fn train_column(&self, j: usize) -> Vec<f64> {
        self.train_indices().iter().map(|&i| self.x.get(i, j)).collect()
    }

    /// Population standard deviation of every feature on the training split.
    pub fn train_std(&self) -> Vec<f64> {
        (0..self.n_features())
            .map(|j| stats::std_dev(&self.train_column(j)))
            .collect()
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    /// Restricts the dataset to the named features, in the given order.
    pub fn with_features<S: AsRef<str>>(&self, names: &[S]) -> Result<TabularDataset> {
        let idx = names
            .iter()
            .map(|n| self.feature_index(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let scaler = self.scaler.as_ref().map(|s| Scaler {
            features: idx.iter().map(|&j| s.features[j]).collect(),
            target: s.target,
        });
        Ok(TabularDataset {
            feature_names: idx.iter().map(|&j| self.feature_names[j].clone()).collect(),
            x: self.x.select_columns(&idx),
            scaler,
            ..self.clone()
        })
    }

    /// Same rows and features with a different train/test assignment.
    pub fn with_train_mask(&self, train_mask: Vec<bool>) -> Result<TabularDataset> {
        if train_mask.len() != self.n_rows() {
            return Err(Error::InvalidArgument("mask length differs from row count".into()));
        }
        let test_mask = train_mask.iter().map(|t| !t).collect();
        Ok(TabularDataset {
            train_mask,
            test_mask,
            ..self.clone()
        })
    }

    pub fn snapshot(&self) -> DatasetSnapshot {
        DatasetSnapshot {
            feature_names: self.feature_names.clone(),
            scaler: self.scaler.clone(),
            n_train: self.n_train(),
            n_test: self.n_test(),
            seed: self.seed,
        }
    }
}

/// Number of training rows for `n` rows at the given test ratio.
pub fn train_count(n: usize, test_ratio: f64) -> usize {
    ((1.0 - test_ratio) * n as f64 + 1e-9).floor() as usize
}

/// Seeded shuffle followed by a prefix split: the first rows of the
/// permutation train, the rest test.
pub fn split_mask(n: usize, split: SplitSpec) -> Result<Vec<bool>> {
    if !(split.test_ratio > 0.0 && split.test_ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test_ratio must lie in (0, 1), got {}",
            split.test_ratio
        )));
    }
    let n_train = train_count(n, split.test_ratio);
    if n_train == 0 || n_train == n {
        return Err(Error::InsufficientData(format!(
            "{n} rows cannot be split at test ratio {}",
            split.test_ratio
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stats::rng(split.seed));
    let mut mask = vec![false; n];
    for &i in &order[..n_train] {
        mask[i] = true;
    }
    Ok(mask)
}

/// Builds the modelling dataset: features = cycle, settings, sensors;
/// target = RUL. With `normalize`, min-max ranges come from the training
/// split only and are applied to every row (test values may leave [0, 1]).
pub fn build_dataset(
    table: &RawRecordTable,
    unit_filter: Option<u32>,
    normalize: bool,
    split: SplitSpec,
) -> Result<TabularDataset> {
    let derived;
    let (records, rul): (&[RawRecord], &[f64]) = match table.rul() {
        Some(r) => (table.records(), r),
        None => {
            derived = derive_rul(table.clone());
            (derived.records(), derived.rul().expect("derived"))
        }
    };
    let keep: Vec<usize> = match unit_filter {
        Some(u) => {
            let k: Vec<usize> = (0..records.len()).filter(|&i| records[i].unit == u).collect();
            if k.is_empty() {
                return Err(Error::UnitNotFound(u));
            }
            k
        }
        None => (0..records.len()).collect(),
    };
    let names = feature_names();
    let d = names.len();
    let mut x = Matrix::zeros(keep.len(), d);
    for (r, &i) in keep.iter().enumerate() {
        for (j, v) in records[i].features().enumerate() {
            x.set(r, j, v);
        }
    }
    let mut y: Vec<f64> = keep.iter().map(|&i| rul[i]).collect();
    let unit_ids: Vec<u32> = keep.iter().map(|&i| records[i].unit).collect();
    let train_mask = split_mask(keep.len(), split)?;

    let scaler = if normalize {
        let train: Vec<usize> = (0..keep.len()).filter(|&i| train_mask[i]).collect();
        let features: Vec<(f64, f64)> = (0..d)
            .map(|j| stats::min_max(&train.iter().map(|&i| x.get(i, j)).collect::<Vec<_>>()))
            .collect();
        let target = stats::min_max(&train.iter().map(|&i| y[i]).collect::<Vec<_>>());
        for i in 0..keep.len() {
            for (j, &range) in features.iter().enumerate() {
                x.set(i, j, scale(x.get(i, j), range));
            }
            y[i] = scale(y[i], target);
        }
        Some(Scaler { features, target })
    } else {
        None
    };

    let test_mask = train_mask.iter().map(|t| !t).collect();
    Ok(TabularDataset {
        feature_names: names,
        x,
        y,
        unit_ids,
        scaler,
        train_mask,
        test_mask,
        seed: split.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(unit: u32, cycle: u32, base: f64) -> String {
        let mut s = format!("{unit} {cycle}");
        for k in 0..24 {
            s.push_str(&format!(" {}", base + k as f64 * 0.5));
        }
        s
    }

    fn three_rows() -> String {
        (1..=3).map(|c| row(1, c, c as f64)).collect::<Vec<_>>().join("\n")
    }

    #[test]
    fn parses_three_row_whitespace_file() {
        let t = parse_records(&three_rows(), RecordFormat::Whitespace).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.records()[2].cycle, 3);
        assert_eq!(t.records()[0].features().count(), 25);
    }

    #[test]
    fn short_row_reports_its_line() {
        let mut text = three_rows();
        text.push('\n');
        let mut bad = row(1, 4, 0.0);
        bad.truncate(bad.rfind(' ').unwrap());
        text.push_str(&bad);
        match parse_records(&text, RecordFormat::Whitespace) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_and_non_monotone_rows_rejected() {
        let text = format!("{}\n{}", row(1, 1, 0.0), row(1, 1, 0.0));
        assert!(matches!(
            parse_records(&text, RecordFormat::Whitespace),
            Err(Error::Parse { line: 2, .. })
        ));
        let text = row(1, 1, 0.0).replace(" 0.5 ", " abc ");
        assert!(matches!(
            parse_records(&text, RecordFormat::Whitespace),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_records("  \n", RecordFormat::Whitespace),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn csv_columns_matched_by_name() {
        let mut names = column_names();
        names.reverse();
        let mut text = names.join(",");
        for c in 1..=2u32 {
            let vals: Vec<String> = names
                .iter()
                .map(|n| match n.as_str() {
                    "unit" => "7".to_string(),
                    "cycle" => c.to_string(),
                    "s21" => "21.5".to_string(),
                    _ => "0".to_string(),
                })
                .collect();
            text.push('\n');
            text.push_str(&vals.join(","));
        }
        let t = parse_records(&text, RecordFormat::Csv).unwrap();
        assert_eq!(t.records()[1].unit, 7);
        assert_eq!(t.records()[1].cycle, 2);
        assert_eq!(t.records()[1].sensors[20], 21.5);
    }

    #[test]
    fn rul_counts_down_to_zero_per_unit() {
        let text = [row(1, 1, 0.0), row(1, 2, 0.0), row(1, 3, 0.0), row(2, 5, 0.0)].join("\n");
        let t = derive_rul(parse_records(&text, RecordFormat::Whitespace).unwrap());
        assert_eq!(t.rul().unwrap(), &[2.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn split_sizes_follow_floor_arithmetic() {
        assert_eq!(train_count(223, 0.2), 178);
        let m = split_mask(223, SplitSpec::default()).unwrap();
        assert_eq!(m.iter().filter(|&&t| t).count(), 178);
        assert_eq!(m, split_mask(223, SplitSpec::default()).unwrap());
        assert!(split_mask(10, SplitSpec { test_ratio: 1.0, seed: 0 }).is_err());
        assert!(split_mask(10, SplitSpec { test_ratio: 0.0, seed: 0 }).is_err());
    }

    #[test]
    fn normalization_uses_training_rows() {
        let text = (1..=20).map(|c| row(3, c, (c * c) as f64)).collect::<Vec<_>>().join("\n");
        let t = parse_records(&text, RecordFormat::Whitespace).unwrap();
        let ds = build_dataset(&t, Some(3), true, SplitSpec::default()).unwrap();
        for j in 0..ds.n_features() {
            let (lo, hi) = stats::min_max(&ds.train_column(j));
            assert_eq!(lo, 0.0);
            assert_eq!(hi, 1.0);
        }
        assert!(build_dataset(&t, Some(9), true, SplitSpec::default()).is_err());
    }
}
