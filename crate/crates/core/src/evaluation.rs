//! Error metrics, repeated k-fold cross-validation and rank-based
//! comparison of several algorithms over several datasets.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::data::{check_labels, Dataset, Task};
use crate::error::{Error, Result};
use crate::estimator::{classify, fit, predict, ModelSpec};
use crate::linalg::{Matrix, Vector};
use crate::rng::{Rng, DEFAULT_SEED};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub rmse: f64,
    /// Balanced error rate; classification only.
    pub ber: Option<f64>,
    pub train_seconds: f64,
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "prediction/target lengths",
            expected: b.len(),
            found: a.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::InvalidShape(
            "metrics need at least one sample".into(),
        ));
    }
    Ok(())
}

pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_pair(pred, target)?;
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.len() as f64)
}

pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    Ok(mse(pred, target)?.sqrt())
}

/// Mean of the error rates on the positive and on the negative class.
pub fn ber(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_pair(pred, target)?;
    check_labels(pred)?;
    check_labels(target)?;
    let (mut pos, mut pos_err, mut neg, mut neg_err) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in pred.iter().zip(target) {
        if t > 0.0 {
            pos += 1;
            pos_err += usize::from(p != t);
        } else {
            neg += 1;
            neg_err += usize::from(p != t);
        }
    }
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassTarget);
    }
    Ok(0.5 * (pos_err as f64 / pos as f64 + neg_err as f64 / neg as f64))
}

/// Repeated k-fold protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub trials: usize,
    pub folds: usize,
    pub seed: u64,
}

impl Default for CvPlan {
    fn default() -> Self {
        CvPlan {
            trials: 10,
            folds: 2,
            seed: DEFAULT_SEED,
        }
    }
}

impl CvPlan {
    pub fn new(trials: usize, folds: usize, seed: u64) -> Result<Self> {
        if trials < 1 {
            return Err(Error::InvalidParameter(
                "at least one trial is required".into(),
            ));
        }
        if folds < 2 {
            return Err(Error::InvalidParameter(format!(
                "at least two folds are required, got {folds}"
            )));
        }
        Ok(CvPlan {
            trials,
            folds,
            seed,
        })
    }
}

/// Fold index of every sample for one trial.
///
/// Regression shuffles all indices and deals them round-robin. Classification
/// deals each class separately so that every fold sees both labels.
pub fn fold_assignments(
    targets: &[f64],
    task: Task,
    folds: usize,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    let mut assignment = vec![0; targets.len()];
    let groups: Vec<Vec<usize>> = match task {
        Task::Regression => vec![(0..targets.len()).collect()],
        Task::Classification => {
            check_labels(targets)?;
            vec![
                (0..targets.len()).filter(|&i| targets[i] < 0.0).collect(),
                (0..targets.len()).filter(|&i| targets[i] > 0.0).collect(),
            ]
        }
    };
    let mut offset = 0;
    for mut group in groups {
        if group.len() < folds {
            return Err(Error::InsufficientSamples {
                required: folds,
                available: group.len(),
            });
        }
        rng.shuffle(&mut group);
        for (pos, &i) in group.iter().enumerate() {
            assignment[i] = (pos + offset) % folds;
        }
        offset += group.len();
    }
    Ok(assignment)
}

/// Outcome of one `(trial, fold)` cell.
#[derive(Debug)]
pub struct FoldRun {
    pub trial: usize,
    pub fold: usize,
    pub outcome: Result<Metrics>,
}

/// Trains on all folds but one, scores on the held-out fold. Transform
/// statistics are learned from the training part only.
pub fn evaluate_split(train: &Dataset, test: &Dataset, spec: &ModelSpec) -> Result<Metrics> {
    let (model, train_seconds) = time_fit(|| fit(&train.features, &train.targets, spec));
    let model = model?;
    let pred = predict(&model, &test.features)?;
    let mse = mse(&pred, &test.targets)?;
    let ber = match test.task {
        Task::Regression => None,
        Task::Classification => Some(ber(&classify(&model, &test.features)?, &test.targets)?),
    };
    Ok(Metrics {
        mse,
        rmse: mse.sqrt(),
        ber,
        train_seconds,
    })
}

/// Every `(trial, fold)` cell in order, failures included.
pub fn cross_validate_runs(
    data: &Dataset,
    spec: &ModelSpec,
    plan: &CvPlan,
) -> Result<Vec<FoldRun>> {
    let mut runs = Vec::with_capacity(plan.trials * plan.folds);
    for trial in 0..plan.trials {
        let mut rng = Rng::for_stream(plan.seed, trial as u64);
        let assignment = fold_assignments(&data.targets, data.task, plan.folds, &mut rng)?;
        for fold in 0..plan.folds {
            let (test_idx, train_idx): (Vec<usize>, Vec<usize>) =
                (0..data.n_samples()).partition(|&i| assignment[i] == fold);
            let outcome = evaluate_split(&data.subset(&train_idx), &data.subset(&test_idx), spec);
            runs.push(FoldRun {
                trial,
                fold,
                outcome,
            });
        }
    }
    Ok(runs)
}

/// Metrics for every `(trial, fold)`, failing on the first failed cell.
pub fn cross_validate(data: &Dataset, spec: &ModelSpec, plan: &CvPlan) -> Result<Vec<Metrics>> {
    cross_validate_runs(data, spec, plan)?
        .into_iter()
        .map(|r| r.outcome)
        .collect()
}

/// Runs `f` and returns its result with the elapsed wall-clock seconds,
/// truncated to whole milliseconds.
pub fn time_fit<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    let ms = start.elapsed().as_millis();
    (out, ms as f64 / 1000.0)
}

/// Scores of `k_alg` algorithms on `n_datasets` datasets (lower is better).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    scores: Matrix,
}

impl RankTable {
    /// `scores` has one row per dataset and one column per algorithm.
    pub fn new(scores: Matrix) -> Result<Self> {
        let (n, k) = scores.shape();
        if n < 2 || k < 2 {
            return Err(Error::DegenerateTable(format!(
                "need at least 2 datasets and 2 algorithms, got {n} x {k}"
            )));
        }
        if !scores.is_finite() {
            return Err(Error::DegenerateTable("scores must be finite".into()));
        }
        Ok(RankTable { scores })
    }

    pub fn n_datasets(&self) -> usize {
        self.scores.rows()
    }

    pub fn n_algorithms(&self) -> usize {
        self.scores.cols()
    }

    pub fn scores(&self) -> &Matrix {
        &self.scores
    }

    /// Mean rank of every algorithm across datasets.
    pub fn mean_ranks(&self) -> Vector {
        let k = self.n_algorithms();
        let mut total = Vector::zeros(k);
        for row in self.scores.iter_rows() {
            for (j, r) in rank_row(row).into_iter().enumerate() {
                total[j] += r;
            }
        }
        total.scale(1.0 / self.n_datasets() as f64)
    }
}

/// Ranks with 1 for the smallest value; ties share their average rank.
pub fn rank_row(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) hold ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        i = j;
    }
    ranks
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub p_value: f64,
    pub mean_ranks: Vector,
}

/// Friedman chi-square statistic with `k - 1` degrees of freedom.
pub fn friedman_test(table: &RankTable) -> Result<FriedmanResult> {
    let n = table.n_datasets() as f64;
    let k = table.n_algorithms() as f64;
    let mean_ranks = table.mean_ranks();
    let sum_sq: f64 = mean_ranks.iter().map(|r| r * r).sum();
    let statistic = (12.0 * n / (k * (k + 1.0)) * (sum_sq - k * (k + 1.0).powi(2) / 4.0)).max(0.0);
    let dist = ChiSquared::new(k - 1.0)
        .map_err(|e| Error::DegenerateTable(format!("chi-square distribution: {e}")))?;
    Ok(FriedmanResult {
        statistic,
        p_value: dist.sf(statistic),
        mean_ranks,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NemenyiAlpha {
    P05,
    P10,
}

impl NemenyiAlpha {
    pub fn from_level(level: f64) -> Result<Self> {
        if level == 0.05 {
            Ok(NemenyiAlpha::P05)
        } else if level == 0.10 {
            Ok(NemenyiAlpha::P10)
        } else {
            Err(Error::InvalidParameter(format!(
                "Nemenyi level must be 0.05 or 0.10, got {level}"
            )))
        }
    }
}

// Two-tailed Nemenyi critical values (studentized range / sqrt 2), k = 2..=10.
const Q_05: [f64; 9] = [
    1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164,
];
const Q_10: [f64; 9] = [
    1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920,
];

/// Critical difference of mean ranks, `q_alpha * sqrt(k (k + 1) / (6 N))`.
pub fn nemenyi_cd(k_alg: usize, n_datasets: usize, alpha: NemenyiAlpha) -> Result<f64> {
    if !(2..=10).contains(&k_alg) {
        return Err(Error::UnsupportedK(k_alg));
    }
    if n_datasets == 0 {
        return Err(Error::DegenerateTable("no datasets".into()));
    }
    let q = match alpha {
        NemenyiAlpha::P05 => Q_05[k_alg - 2],
        NemenyiAlpha::P10 => Q_10[k_alg - 2],
    };
    let k = k_alg as f64;
    Ok(q * (k * (k + 1.0) / (6.0 * n_datasets as f64)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::solver::StretchConfig;
    use crate::transform::BasisSpec;

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
        assert!(matches!(
            mse(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(mse(&[], &[]).is_err());
        assert_eq!(rmse(&[0.0], &[3.0]).unwrap(), 3.0);
    }

    #[test]
    fn ber_examples() {
        let t = [1.0, 1.0, 1.0, 1.0, -1.0, -1.0];
        let p = [1.0, 1.0, 1.0, -1.0, -1.0, 1.0];
        assert_eq!(ber(&p, &t).unwrap(), 0.375);
        assert_eq!(ber(&t, &t).unwrap(), 0.0);
        assert_eq!(ber(&[1.0; 4], &[1.0, 1.0, -1.0, -1.0]).unwrap(), 0.5);
        assert!(matches!(
            ber(&[1.0, 1.0], &[1.0, 1.0]),
            Err(Error::SingleClassTarget)
        ));
    }

    #[test]
    fn plan_validation() {
        assert!(CvPlan::new(0, 2, 1).is_err());
        assert!(CvPlan::new(1, 1, 1).is_err());
        assert_eq!(CvPlan::default().trials, 10);
        assert_eq!(CvPlan::default().folds, 2);
    }

    #[test]
    fn stratified_folds_hold_both_classes() {
        let t = [1.0, 1.0, 1.0, -1.0, -1.0, -1.0, 1.0, -1.0];
        let mut rng = Rng::seed_from(1);
        let a = fold_assignments(&t, Task::Classification, 2, &mut rng).unwrap();
        for f in 0..2 {
            assert!((0..8).any(|i| a[i] == f && t[i] > 0.0));
            assert!((0..8).any(|i| a[i] == f && t[i] < 0.0));
        }
        let mut rng = Rng::seed_from(1);
        assert!(matches!(
            fold_assignments(&[1.0, 1.0, -1.0], Task::Classification, 2, &mut rng),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn four_samples_two_folds() {
        let x = Matrix::from_rows(&[[0.2], [0.4], [0.6], [0.8]]).unwrap();
        let y: Vector = vec![1.0, 2.0, 3.0, 4.0].into();
        let data = Dataset::new("four", x, y, Task::Regression).unwrap();
        let spec = ModelSpec::new(
            BasisSpec::raw(),
            StretchConfig::regularized(2.0, 10.0).unwrap(),
        );
        let plan = CvPlan::new(1, 2, 5).unwrap();
        let a = cross_validate(&data, &spec, &plan).unwrap();
        let b = cross_validate(&data, &spec, &plan).unwrap();
        assert_eq!(a.len(), 2);
        let strip = |m: &[Metrics]| m.iter().map(|m| (m.mse, m.ber)).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(rank_row(&[3.0, 1.0, 2.0]), vec![3.0, 1.0, 2.0]);
        assert_eq!(rank_row(&[1.0, 1.0, 2.0]), vec![1.5, 1.5, 3.0]);
        assert_eq!(rank_row(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn friedman_hand_example() {
        let scores = Matrix::from_fn(4, 3, |r, c| (c + 1) as f64 * 0.1 + r as f64);
        let res = friedman_test(&RankTable::new(scores).unwrap()).unwrap();
        assert!((res.statistic - 8.0).abs() < 1e-12);
        assert!((res.p_value - (-4.0f64).exp()).abs() < 1e-10);
        assert_eq!(res.mean_ranks.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn friedman_all_equal() {
        let res =
            friedman_test(&RankTable::new(Matrix::from_fn(5, 4, |_, _| 0.3)).unwrap()).unwrap();
        assert_eq!(res.statistic, 0.0);
        assert_eq!(res.p_value, 1.0);
    }

    #[test]
    fn rank_table_validation() {
        assert!(RankTable::new(Matrix::zeros(1, 3)).is_err());
        assert!(RankTable::new(Matrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn nemenyi_examples() {
        let cd = nemenyi_cd(2, 10, NemenyiAlpha::P05).unwrap();
        assert!((cd - 1.960 * 0.1f64.sqrt()).abs() < 1e-12);
        assert!((cd - 0.6198).abs() < 5e-4);
        let quarter = nemenyi_cd(2, 40, NemenyiAlpha::P05).unwrap();
        assert!((cd / quarter - 2.0).abs() < 1e-12);
        assert!(matches!(
            nemenyi_cd(11, 10, NemenyiAlpha::P05),
            Err(Error::UnsupportedK(11))
        ));
        assert!(nemenyi_cd(1, 10, NemenyiAlpha::P10).is_err());
    }

    #[test]
    fn timing_noop() {
        let ((), secs) = time_fit(|| ());
        assert!(secs < 0.01);
    }
}
