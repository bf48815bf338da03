//! Cross-validation benchmark driven by a TOML manifest.
//!
//! ```toml
//! output_dir = "results"
//! seed = 7
//! trials = 10
//! folds = 2
//! stats = true
//!
//! [[datasets]]
//! name = "curve"
//! synth = { kind = "poly1d", n = 40, sigma = 0.05 }
//!
//! [[datasets]]
//! name = "uci"
//! path = "data/uci.csv"
//! target = "label"
//! task = "classification"
//!
//! [[algorithms]]
//! name = "sr"
//! basis = "poly:4"
//! k = "standard-grid"       # or a list such as [1.25, 1.5]
//! c = [10, 1e4, "exact"]    # or "standard-grid"
//! density = [1.0, 0.1]
//! quadrant_map = true
//! ```
//!
//! Outputs `runs.csv` (one row per dataset, config, trial and fold),
//! `summary.csv` (means and standard deviations, no timings, so reruns are
//! byte-identical), `timing.csv`, and `stats.csv` when `stats = true`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use stretchy_core::data::{load_csv, synthesize, TargetColumn};
use stretchy_core::evaluation::{
    cross_validate_runs, friedman_test, nemenyi_cd, CvPlan, Metrics, NemenyiAlpha, RankTable,
};
use stretchy_core::linalg::DEFAULT_RCOND;
use stretchy_core::rng::DEFAULT_SEED;
use stretchy_core::transform::NOMINAL_SLOPE;
use stretchy_core::{
    BasisSpec, Dataset, Matrix, Regularization, StretchConfig, SynthKind, SynthSpec, Task,
};

use crate::commands::model_spec;
use crate::{c_from_number, describe_reg, BenchArgs, CValue, FloatList, TransformArgs};

pub const STANDARD_K_GRID: [f64; 5] = [1.1, 1.25, 1.5, 1.75, 2.0];
pub const STANDARD_C_GRID: [f64; 6] = [10.0, 1e2, 1e3, 1e4, 1e8, 1e100];
const STANDARD_GRID: &str = "standard-grid";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub stats: bool,
    #[serde(default)]
    pub stats_metric: StatsMetric,
    pub datasets: Vec<DatasetEntry>,
    pub algorithms: Vec<AlgorithmEntry>,
}

fn default_trials() -> usize {
    10
}

fn default_folds() -> usize {
    2
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatsMetric {
    #[default]
    Mse,
    Rmse,
    Ber,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    pub path: Option<PathBuf>,
    pub target: Option<String>,
    pub task: Option<Task>,
    pub synth: Option<SynthEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthEntry {
    pub kind: SynthKind,
    pub n: Option<usize>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum KGrid {
    Keyword(String),
    Values(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum CEntry {
    Number(f64),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum CGrid {
    Keyword(String),
    Values(Vec<CEntry>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmEntry {
    pub name: String,
    #[serde(default = "default_basis")]
    pub basis: String,
    pub k: KGrid,
    pub c: CGrid,
    #[serde(default = "default_density")]
    pub density: Vec<f64>,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default)]
    pub quadrant_map: bool,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub rcond: Option<f64>,
}

fn default_sigma() -> f64 {
    crate::DEFAULT_NOISE_SIGMA
}

fn default_basis() -> String {
    "raw".into()
}

fn default_density() -> Vec<f64> {
    vec![1.0]
}

/// One point of an algorithm's grid.
#[derive(Debug, Clone)]
pub struct Config {
    pub label: String,
    pub basis: BasisSpec,
    pub stretch: StretchConfig,
    pub density: f64,
    pub transform: TransformArgs,
}

impl AlgorithmEntry {
    fn k_values(&self) -> Result<Vec<f64>> {
        match &self.k {
            KGrid::Keyword(w) if w == STANDARD_GRID => Ok(STANDARD_K_GRID.to_vec()),
            KGrid::Keyword(w) => bail!("unknown k grid keyword {w:?}"),
            KGrid::Values(v) if v.is_empty() => bail!("empty k grid in {:?}", self.name),
            KGrid::Values(v) => Ok(v.clone()),
        }
    }

    fn c_values(&self) -> Result<Vec<CValue>> {
        let to_value = |c: f64| c_from_number(c).map_err(anyhow::Error::msg);
        match &self.c {
            CGrid::Keyword(w) if w == STANDARD_GRID => {
                STANDARD_C_GRID.iter().map(|&c| to_value(c)).collect()
            }
            CGrid::Keyword(w) => bail!("unknown c grid keyword {w:?}"),
            CGrid::Values(v) if v.is_empty() => bail!("empty c grid in {:?}", self.name),
            CGrid::Values(v) => v
                .iter()
                .map(|e| match e {
                    CEntry::Number(c) => to_value(*c),
                    CEntry::Text(t) => crate::parse_c(t).map_err(anyhow::Error::msg),
                })
                .collect(),
        }
    }

    pub fn expand(&self) -> Result<Vec<Config>> {
        let basis: BasisSpec = self.basis.parse()?;
        if self.density.is_empty() {
            bail!("empty density grid in {:?}", self.name);
        }
        let transform = TransformArgs {
            standardize: self.standardize,
            quadrant_map: self.quadrant_map,
            a: self.a.unwrap_or(NOMINAL_SLOPE),
            b: self.b.map(|b| FloatList(vec![b])),
        };
        let mut out = Vec::new();
        for k in self.k_values()? {
            for c in self.c_values()? {
                for &density in &self.density {
                    let stretch = StretchConfig::new(k, c.regularization())?
                        .with_rcond(self.rcond.unwrap_or(DEFAULT_RCOND))?;
                    out.push(Config {
                        label: format!(
                            "{}:k={}:c={}:density={}",
                            self.name,
                            k,
                            describe_reg(&stretch.reg),
                            density
                        ),
                        basis,
                        stretch,
                        density,
                        transform: transform.clone(),
                    });
                }
            }
        }
        Ok(out)
    }
}

impl Manifest {
    pub fn from_path(path: &Path) -> Result<Manifest> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let manifest: Manifest =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if manifest.datasets.is_empty() {
            bail!("manifest lists no datasets");
        }
        if manifest.algorithms.is_empty() {
            bail!("manifest lists no algorithms");
        }
        Ok(manifest)
    }

    pub fn configs(&self) -> Result<Vec<Config>> {
        let mut all = Vec::new();
        for a in &self.algorithms {
            all.extend(a.expand()?);
        }
        Ok(all)
    }
}

fn load_dataset(entry: &DatasetEntry, base: &Path) -> Result<Dataset> {
    let mut data = match (&entry.path, &entry.synth) {
        (Some(path), None) => {
            let target = TargetColumn::Name(entry.target.clone().unwrap_or_else(|| "y".into()));
            let full = base.join(path);
            load_csv(&full, &target, entry.task.unwrap_or(Task::Regression))
                .with_context(|| format!("loading {}", full.display()))?
        }
        (None, Some(s)) => {
            let n = s.n.unwrap_or(match s.kind {
                SynthKind::Poly1d => 5,
                SynthKind::Twoclass2d => 20,
            });
            synthesize(&SynthSpec::new(
                s.kind,
                n,
                s.sigma,
                s.seed.unwrap_or(DEFAULT_SEED),
            )?)
        }
        _ => bail!(
            "dataset {:?} needs exactly one of path or synth",
            entry.name
        ),
    };
    data.name = entry.name.clone();
    Ok(data)
}

/// One line of `runs.csv`.
#[derive(Debug)]
struct RunRow {
    dataset: String,
    config: usize,
    trial: Option<usize>,
    fold: Option<usize>,
    outcome: std::result::Result<Metrics, String>,
}

pub fn run(args: &BenchArgs) -> Result<usize> {
    let manifest = Manifest::from_path(&args.manifest)?;
    let base = args
        .manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let plan = CvPlan::new(
        args.trials.unwrap_or(manifest.trials),
        args.folds.unwrap_or(manifest.folds),
        args.seed.or(manifest.seed).unwrap_or(DEFAULT_SEED),
    )?;
    let configs = manifest.configs()?;
    let out_dir = base.join(
        manifest
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("bench-out")),
    );
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let mut rows = Vec::new();
    for entry in &manifest.datasets {
        let data = load_dataset(entry, &base);
        for (ci, cfg) in configs.iter().enumerate() {
            let failure = |msg: String| RunRow {
                dataset: entry.name.clone(),
                config: ci,
                trial: None,
                fold: None,
                outcome: Err(msg),
            };
            let data = match &data {
                Ok(d) => d,
                Err(e) => {
                    rows.push(failure(format!("{e:#}")));
                    continue;
                }
            };
            let spec = match model_spec(
                cfg.basis,
                cfg.stretch,
                cfg.density,
                &cfg.transform,
                data.n_features(),
            ) {
                Ok(s) => s,
                Err(e) => {
                    rows.push(failure(format!("{e:#}")));
                    continue;
                }
            };
            match cross_validate_runs(data, &spec, &plan) {
                Ok(runs) => rows.extend(runs.into_iter().map(|r| RunRow {
                    dataset: entry.name.clone(),
                    config: ci,
                    trial: Some(r.trial),
                    fold: Some(r.fold),
                    outcome: r.outcome.map_err(|e| e.to_string()),
                })),
                Err(e) => rows.push(failure(e.to_string())),
            }
        }
    }

    write_runs(&out_dir.join("runs.csv"), &rows, &configs)?;
    let groups = group_rows(&manifest, &configs, &rows);
    write_summary(&out_dir.join("summary.csv"), &groups, &configs)?;
    write_timing(&out_dir.join("timing.csv"), &groups, &configs)?;
    if manifest.stats {
        write_stats(&out_dir.join("stats.csv"), &manifest, &groups, &configs)?;
    }

    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    println!(
        "{} runs ({} failed) over {} datasets x {} configs; results in {}",
        rows.len(),
        failed,
        manifest.datasets.len(),
        configs.len(),
        out_dir.display()
    );
    Ok(failed)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn c_column(reg: &Regularization) -> String {
    describe_reg(reg)
}

fn write_runs(path: &Path, rows: &[RunRow], configs: &[Config]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "dataset",
        "config",
        "k",
        "c",
        "density",
        "trial",
        "fold",
        "mse",
        "rmse",
        "ber",
        "train_seconds",
        "error",
    ])?;
    for r in rows {
        let cfg = &configs[r.config];
        let (m, err) = match &r.outcome {
            Ok(m) => (Some(m), String::new()),
            Err(e) => (None, e.clone()),
        };
        w.write_record([
            r.dataset.clone(),
            cfg.label.clone(),
            cfg.stretch.k.to_string(),
            c_column(&cfg.stretch.reg),
            cfg.density.to_string(),
            r.trial.map(|t| t.to_string()).unwrap_or_default(),
            r.fold.map(|f| f.to_string()).unwrap_or_default(),
            fmt_opt(m.map(|m| m.mse)),
            fmt_opt(m.map(|m| m.rmse)),
            fmt_opt(m.and_then(|m| m.ber)),
            fmt_opt(m.map(|m| m.train_seconds)),
            err,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Metrics of one (dataset, config) cell.
struct Group {
    dataset: String,
    config: usize,
    runs: usize,
    metrics: Vec<Metrics>,
}

fn group_rows(manifest: &Manifest, configs: &[Config], rows: &[RunRow]) -> Vec<Group> {
    let mut groups = Vec::new();
    for entry in &manifest.datasets {
        for ci in 0..configs.len() {
            let cell: Vec<&RunRow> = rows
                .iter()
                .filter(|r| r.dataset == entry.name && r.config == ci)
                .collect();
            groups.push(Group {
                dataset: entry.name.clone(),
                config: ci,
                runs: cell.len(),
                metrics: cell
                    .iter()
                    .filter_map(|r| r.outcome.as_ref().ok().copied())
                    .collect(),
            });
        }
    }
    groups
}

/// Mean and sample standard deviation (absent below two values).
fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

fn write_summary(path: &Path, groups: &[Group], configs: &[Config]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "dataset",
        "config",
        "k",
        "c",
        "density",
        "runs",
        "failed",
        "mse_mean",
        "mse_std",
        "rmse_mean",
        "rmse_std",
        "ber_mean",
        "ber_std",
    ])?;
    for g in groups {
        let cfg = &configs[g.config];
        let mse: Vec<f64> = g.metrics.iter().map(|m| m.mse).collect();
        let rmse: Vec<f64> = g.metrics.iter().map(|m| m.rmse).collect();
        let ber: Vec<f64> = g.metrics.iter().filter_map(|m| m.ber).collect();
        let (mse_m, mse_s) = mean_std(&mse);
        let (rmse_m, rmse_s) = mean_std(&rmse);
        let (ber_m, ber_s) = mean_std(&ber);
        w.write_record([
            g.dataset.clone(),
            cfg.label.clone(),
            cfg.stretch.k.to_string(),
            c_column(&cfg.stretch.reg),
            cfg.density.to_string(),
            g.runs.to_string(),
            (g.runs - g.metrics.len()).to_string(),
            fmt_opt(mse_m),
            fmt_opt(mse_s),
            fmt_opt(rmse_m),
            fmt_opt(rmse_s),
            fmt_opt(ber_m),
            fmt_opt(ber_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_timing(path: &Path, groups: &[Group], configs: &[Config]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "dataset",
        "config",
        "train_seconds_mean",
        "train_seconds_std",
    ])?;
    for g in groups {
        let t: Vec<f64> = g.metrics.iter().map(|m| m.train_seconds).collect();
        let (mean, std) = mean_std(&t);
        w.write_record([
            g.dataset.clone(),
            configs[g.config].label.clone(),
            fmt_opt(mean),
            fmt_opt(std),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_stats(
    path: &Path,
    manifest: &Manifest,
    groups: &[Group],
    configs: &[Config],
) -> Result<()> {
    let n = manifest.datasets.len();
    let k = configs.len();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["quantity", "config", "value"])?;
    if n < 2 || k < 2 {
        w.write_record(["skipped", "", "needs at least 2 datasets and 2 configs"])?;
        w.flush()?;
        return Ok(());
    }
    let mut scores = Vec::with_capacity(n * k);
    for g in groups {
        let values: Vec<f64> = g
            .metrics
            .iter()
            .filter_map(|m| match manifest.stats_metric {
                StatsMetric::Mse => Some(m.mse),
                StatsMetric::Rmse => Some(m.rmse),
                StatsMetric::Ber => m.ber,
            })
            .collect();
        if values.len() != g.runs || values.is_empty() {
            w.write_record(["skipped", "", "a cell has failed runs or lacks the metric"])?;
            w.flush()?;
            return Ok(());
        }
        scores.push(values.iter().sum::<f64>() / values.len() as f64);
    }
    let table = RankTable::new(Matrix::from_row_major(n, k, scores)?)?;
    let res = friedman_test(&table)?;
    w.write_record(["friedman_statistic", "", &res.statistic.to_string()])?;
    w.write_record(["p_value", "", &res.p_value.to_string()])?;
    for (alpha, tag) in [
        (NemenyiAlpha::P05, "nemenyi_cd_0.05"),
        (NemenyiAlpha::P10, "nemenyi_cd_0.10"),
    ] {
        if let Ok(cd) = nemenyi_cd(k, n, alpha) {
            w.write_record([tag, "", &cd.to_string()])?;
        }
    }
    for (cfg, r) in configs.iter().zip(res.mean_ranks.iter()) {
        w.write_record(["mean_rank", &cfg.label, &r.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
