//! Datasets, synthetic generators and model persistence.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::FittedModel;
use crate::linalg::{Matrix, Vector};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            _ => Err(Error::InvalidParameter(format!("unknown task {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub features: Matrix,
    pub targets: Vector,
    pub task: Task,
    pub feature_names: Vec<String>,
    pub target_name: String,
}

impl Dataset {
    /// Builds a dataset with default column names `x1, x2, ...` and `y`.
    pub fn new(name: &str, features: Matrix, targets: Vector, task: Task) -> Result<Self> {
        let feature_names = (1..=features.cols()).map(|i| format!("x{i}")).collect();
        Dataset::with_names(name, features, targets, task, feature_names, "y".into())
    }

    pub fn with_names(
        name: &str,
        features: Matrix,
        targets: Vector,
        task: Task,
        feature_names: Vec<String>,
        target_name: String,
    ) -> Result<Self> {
        if targets.len() != features.rows() {
            return Err(Error::DimensionMismatch {
                context: "dataset targets",
                expected: features.rows(),
                found: targets.len(),
            });
        }
        if feature_names.len() != features.cols() {
            return Err(Error::DimensionMismatch {
                context: "feature names",
                expected: features.cols(),
                found: feature_names.len(),
            });
        }
        if task == Task::Classification {
            check_labels(&targets)?;
        }
        Ok(Dataset {
            name: name.to_string(),
            features,
            targets,
            task,
            feature_names,
            target_name,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    /// The samples at `rows`, in that order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: self.features.select_rows(rows),
            targets: rows.iter().map(|&r| self.targets[r]).collect(),
            task: self.task,
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
        }
    }
}

/// Fails unless every label is `-1` or `+1`.
pub fn check_labels(labels: &[f64]) -> Result<()> {
    match labels.iter().find(|&&v| v != 1.0 && v != -1.0) {
        Some(&v) => Err(Error::InvalidLabel(v)),
        None => Ok(()),
    }
}

/// Maps `{0, 1}` labels to `{-1, +1}`; `{-1, +1}` labels pass through.
fn normalize_labels(targets: Vector) -> Result<Vector> {
    if check_labels(&targets).is_ok() {
        return Ok(targets);
    }
    if let Some(&v) = targets.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidLabel(v));
    }
    Ok(targets
        .iter()
        .map(|&v| if v == 0.0 { -1.0 } else { 1.0 })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TargetColumn {
    Name(String),
    Index(usize),
}

impl FromStr for TargetColumn {
    type Err = Error;

    /// A bare integer is a column index, anything else a header name.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.parse::<usize>() {
            Ok(i) => TargetColumn::Index(i),
            Err(_) => TargetColumn::Name(s.to_string()),
        })
    }
}

pub fn load_csv(path: &Path, target: &TargetColumn, task: Task) -> Result<Dataset> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(BufReader::new(File::open(path)?), &name, target, task)
}

/// Parses a headed, comma-separated table of numbers. Line numbers in errors
/// count the header as line 1; column numbers start at 1.
pub fn read_table<R: Read>(reader: R) -> Result<(Vec<String>, Matrix)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut values = Vec::new();
    let mut rows = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::NonNumericCell {
                line: row + 2,
                col: col + 1,
                value: cell.to_string(),
            })?;
            values.push(value);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::ParseError {
            line: 1,
            col: 1,
            message: "no data rows".into(),
        });
    }
    Ok((
        headers.clone(),
        Matrix::from_row_major(rows, headers.len(), values)?,
    ))
}

pub fn load_table(path: &Path) -> Result<(Vec<String>, Matrix)> {
    read_table(BufReader::new(File::open(path)?))
}

/// Reads a table and splits off the target column; every other column is a
/// feature, in file order.
pub fn read_csv<R: Read>(
    reader: R,
    name: &str,
    target: &TargetColumn,
    task: Task,
) -> Result<Dataset> {
    let (mut names, table) = read_table(reader)?;
    let target_idx = match target {
        TargetColumn::Name(n) => names
            .iter()
            .position(|h| h == n)
            .ok_or_else(|| Error::MissingTarget(n.clone()))?,
        TargetColumn::Index(i) if *i < names.len() => *i,
        TargetColumn::Index(i) => return Err(Error::MissingTarget(format!("column {i}"))),
    };
    if names.len() < 2 {
        return Err(Error::InvalidShape(
            "a dataset needs at least one feature column".into(),
        ));
    }
    let feature_cols: Vec<usize> = (0..names.len()).filter(|&c| c != target_idx).collect();
    let features = table.select_columns(&feature_cols);
    let mut targets = table.column(target_idx);
    if task == Task::Classification {
        targets = normalize_labels(targets)?;
    }
    let target_name = names.remove(target_idx);
    Dataset::with_names(name, features, targets, task, names, target_name)
}

pub fn save_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    write_csv(&mut file, data)?;
    file.flush()?;
    Ok(())
}

/// Writes features followed by the target column. Values use the shortest
/// decimal form that parses back to the same double.
pub fn write_csv<W: Write>(out: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = data.feature_names.clone();
    header.push(data.target_name.clone());
    w.write_record(&header)?;
    for (r, row) in data.features.iter_rows().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(data.targets[r].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a single named column.
pub fn write_column_csv<W: Write>(out: W, name: &str, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([name])?;
    for v in values {
        w.write_record([v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Poly1d,
    Twoclass2d,
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poly1d" => Ok(SynthKind::Poly1d),
            "twoclass2d" => Ok(SynthKind::Twoclass2d),
            _ => Err(Error::InvalidParameter(format!("unknown generator {s:?}"))),
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::Poly1d => "poly1d",
            SynthKind::Twoclass2d => "twoclass2d",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n_samples: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(kind: SynthKind, n_samples: usize, noise_sigma: f64, seed: u64) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::InvalidParameter(
                "n_samples must be at least 1".into(),
            ));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be non-negative, got {noise_sigma}"
            )));
        }
        Ok(SynthSpec {
            kind,
            n_samples,
            noise_sigma,
            seed,
        })
    }
}

/// The generating polynomial `1 + 0.6 x - 1.5 x^3 + 0.8 x^4`.
pub fn poly1d_truth(x: f64) -> f64 {
    1.0 + 0.6 * x - 1.5 * x.powi(3) + 0.8 * x.powi(4)
}

/// Coefficients of [`poly1d_truth`] in ascending powers.
pub const POLY1D_COEFFICIENTS: [f64; 5] = [1.0, 0.6, 0.0, -1.5, 0.8];

pub const POLY1D_GRID: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

pub fn synthesize(spec: &SynthSpec) -> Dataset {
    match spec.kind {
        SynthKind::Poly1d => synth_poly1d(spec),
        SynthKind::Twoclass2d => synth_twoclass2d(spec),
    }
}

/// Five samples use the fixed grid `0.1, ..., 0.5`; any other count draws
/// `x` uniformly on `[0.1, 0.5]`. Gaussian noise is added when `sigma > 0`.
pub fn synth_poly1d(spec: &SynthSpec) -> Dataset {
    let n = spec.n_samples;
    let xs: Vec<f64> = if n == POLY1D_GRID.len() {
        POLY1D_GRID.to_vec()
    } else {
        let mut rng = Rng::for_stream(spec.seed, 0);
        (0..n).map(|_| rng.uniform_range(0.1, 0.5)).collect()
    };
    let mut noise = Rng::for_stream(spec.seed, 1);
    let ys: Vector = xs
        .iter()
        .map(|&x| {
            let y = poly1d_truth(x);
            if spec.noise_sigma > 0.0 {
                y + spec.noise_sigma * noise.standard_normal()
            } else {
                y
            }
        })
        .collect();
    let features = Matrix::from_fn(n, 1, |r, _| xs[r]);
    Dataset::with_names(
        "poly1d",
        features,
        ys,
        Task::Regression,
        vec!["x".into()],
        "y".into(),
    )
    .expect("generator output is consistent")
}

/// Per-coordinate standard deviation of each class cluster.
pub const TWOCLASS_STD: f64 = 0.894_427_190_999_915_9; // sqrt(0.8)

/// Two Gaussian clusters centred at `(-1, -1)` (label -1, first half) and
/// `(1, 1)` (label +1, second half).
pub fn synth_twoclass2d(spec: &SynthSpec) -> Dataset {
    let n = spec.n_samples;
    let negatives = n / 2;
    let mut rng = Rng::for_stream(spec.seed, 0);
    let mut coords = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (center, label) = if i < negatives {
            (-1.0, -1.0)
        } else {
            (1.0, 1.0)
        };
        coords.push(center + TWOCLASS_STD * rng.standard_normal());
        coords.push(center + TWOCLASS_STD * rng.standard_normal());
        labels.push(label);
    }
    let features = Matrix::from_row_major(n, 2, coords).expect("finite draws");
    Dataset::with_names(
        "twoclass2d",
        features,
        labels.into(),
        Task::Classification,
        vec!["x1".into(), "x2".into()],
        "label".into(),
    )
    .expect("generator output is consistent")
}

pub const SCHEMA_VERSION: u32 = 1;

/// On-disk envelope for a fitted model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub model: FittedModel,
}

pub fn model_to_string(model: &FittedModel) -> Result<String> {
    let doc = ModelDocument {
        schema_version: SCHEMA_VERSION,
        model: model.clone(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn model_from_str(text: &str) -> Result<FittedModel> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Serialization("missing schema_version".into()))?;
    if found != u64::from(SCHEMA_VERSION) {
        return Err(Error::SchemaVersionMismatch {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: SCHEMA_VERSION,
        });
    }
    let doc: ModelDocument = serde_json::from_value(value)?;
    Ok(doc.model)
}

pub fn save_model(path: &Path, model: &FittedModel) -> Result<()> {
    let mut text = model_to_string(model)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<FittedModel> {
    model_from_str(&std::fs::read_to_string(path)?)
}
