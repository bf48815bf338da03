//! Acceptance suite. Prints one line per criterion and exits non-zero if
//! any criterion fails.

use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use stretchy_core::data::{synth_poly1d, SynthKind, SynthSpec};
use stretchy_core::estimator::{fit, ModelSpec};
use stretchy_core::evaluation::{ber, friedman_test, nemenyi_cd, NemenyiAlpha, RankTable};
use stretchy_core::measure::{convexity_check, k_measure_sum, MeasureParams};
use stretchy_core::rng::DEFAULT_SEED;
use stretchy_core::solver::{
    least_norm, residual_norm, scaling_vector, solve_dual, solve_dual_exact,
    solve_dual_regularized, solve_primal, solve_stretchy,
};
use stretchy_core::transform::bivariate_column_count;
use stretchy_core::variance::{
    condition_sweep, estimator_covariance, expected_estimate, monte_carlo, seeded_positive_matrix,
    NoiseModel, Regime, SWEEP_FIXTURE_SEED,
};
use stretchy_core::{BasisSpec, Matrix, Rng, StretchConfig, Vector};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_time(outcome: Outcome, elapsed: Duration, limit: Duration) -> Outcome {
    let secs = elapsed.as_secs_f64();
    match outcome {
        Ok(d) if elapsed < limit => Ok(format!("{d}; {secs:.2}s")),
        Ok(d) => Err(format!(
            "{d}; {secs:.2}s exceeds {:.0}s",
            limit.as_secs_f64()
        )),
        Err(d) => Err(format!("{d}; {secs:.2}s")),
    }
}

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn positive(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.uniform_range(0.1, 1.0))
}

fn normals(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| rng.standard_normal()).collect()
}

fn k2_reduction() -> Outcome {
    let mut rng = Rng::seed_from(101);
    let c = 3.0;
    let (mut worst_exact, mut worst_reg) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let p = positive(5, 20, &mut rng);
        let y = normals(5, &mut rng);
        let exact = solve_dual_exact(&p, &y, 2.0).map_err(|e| e.to_string())?;
        let ln = least_norm(&p, &y).map_err(|e| e.to_string())?;
        worst_exact = worst_exact.max(max_abs_diff(&exact.alpha, &ln.alpha));

        let reg = solve_dual_regularized(&p, &y, 2.0, c).map_err(|e| e.to_string())?;
        let pn = to_na(&p);
        let gram = &pn * pn.transpose() + DMatrix::identity(5, 5) / (2.0 * c);
        let oracle = pn.transpose()
            * gram
                .lu()
                .solve(&DMatrix::from_column_slice(5, 1, &y))
                .unwrap();
        worst_reg = worst_reg.max(max_abs_diff(&reg.alpha, oracle.as_slice()));
    }
    check(
        worst_exact <= 1e-10 && worst_reg <= 1e-10,
        format!("exact vs least-norm {worst_exact:.1e}, regularized vs ridge {worst_reg:.1e}"),
    )
}

fn primal_dual_agreement() -> Outcome {
    let mut rng = Rng::seed_from(202);
    let mut worst = 0.0f64;
    for (m, d) in [(40, 6), (6, 40)] {
        let p = positive(m, d, &mut rng);
        let y = normals(m, &mut rng);
        for k in [1.25, 1.5, 1.75] {
            for c in [10.0, 1e4] {
                let cfg = StretchConfig::regularized(k, c).map_err(|e| e.to_string())?;
                let dual = solve_dual(&p, &y, &cfg).map_err(|e| e.to_string())?;
                let primal = solve_primal(&p, &y, &cfg).map_err(|e| e.to_string())?;
                worst = worst.max(max_abs_diff(&dual.alpha, &primal.alpha));
            }
        }
    }
    check(worst <= 1e-8, format!("max |dual - primal| {worst:.1e}"))
}

fn exact_interpolation() -> Outcome {
    let mut rng = Rng::seed_from(303);
    let p = Matrix::from_fn(5, 12, |_, _| rng.uniform_range(0.5, 1.5));
    let y = normals(5, &mut rng);
    let bound = 1e-6 * (1.0 + Vector::from(y.as_slice()).norm2());
    let mut worst = 0.0f64;
    for k in [1.2, 1.5, 1.8] {
        let fit = solve_dual_exact(&p, &y, k).map_err(|e| e.to_string())?;
        worst = worst.max(residual_norm(&p, &fit.alpha, &y));
    }
    check(
        worst <= bound,
        format!("max residual {worst:.1e} (bound {bound:.1e})"),
    )
}

fn poly_grid() -> (Matrix, Vector) {
    let data = synth_poly1d(&SynthSpec::new(SynthKind::Poly1d, 5, 0.0, 1).unwrap());
    (
        BasisSpec::poly(10).expand(&data.features).unwrap(),
        data.targets,
    )
}

fn table_reproduction() -> Outcome {
    let (p, y) = poly_grid();
    let low = solve_dual_exact(&p, &y, 1.2)
        .map_err(|e| e.to_string())?
        .alpha;
    let high = solve_dual_exact(&p, &y, 1.8)
        .map_err(|e| e.to_string())?
        .alpha;
    let ok_low = (low[0] - 1.000).abs() <= 0.02
        && (low[1] - 0.602).abs() <= 0.05
        && (low[3] + 1.457).abs() <= 0.10
        && (low[4] - 0.738).abs() <= 0.10
        && low.iter().skip(7).all(|v| v.abs() <= 0.01);
    let ok_high = (high[0] - 0.999).abs() <= 0.02 && (high[1] - 0.626).abs() <= 0.10;
    check(
        ok_low && ok_high,
        format!(
            "k=1.2 a0={:.4} a1={:.4} a3={:.4} a4={:.4} max|a7..|={:.1e}; k=1.8 a0={:.4} a1={:.4}",
            low[0],
            low[1],
            low[3],
            low[4],
            low.iter().skip(7).fold(0.0f64, |m, v| m.max(v.abs())),
            high[0],
            high[1]
        ),
    )
}

fn sparsity_trend() -> Outcome {
    let (p, y) = poly_grid();
    let small = |k: f64| -> Result<usize, String> {
        let a = solve_dual_exact(&p, &y, k)
            .map_err(|e| e.to_string())?
            .alpha;
        Ok(a.iter().filter(|v| v.abs() < 1e-3).count())
    };
    let (low, high) = (small(1.2)?, small(1.8)?);
    check(
        low > high,
        format!("near-zero coefficients: {low} at k=1.2, {high} at k=1.8"),
    )
}

fn scaling_identity() -> Outcome {
    let mut rng = Rng::seed_from(404);
    let mut worst = 0.0f64;
    let mut unit_at_one = true;
    for trial in 0..1000 {
        let m = 1 + (rng.next_u64() % 8) as usize;
        let d = 1 + (rng.next_u64() % 8) as usize;
        let k = if trial % 10 == 0 {
            1.0
        } else {
            rng.uniform_range(1.0, 4.0)
        };
        let a = positive(m, d, &mut rng);
        let b: Vec<f64> = (0..m).map(|_| rng.uniform_range(0.1, 1.0)).collect();
        let s = scaling_vector(&a, &b, k).map_err(|e| e.to_string())?;
        let at = a.transpose();
        let lhs = a.mat_vec(&at.mat_vec(&b).iter().map(|v| v.powf(k)).collect::<Vec<_>>());
        let at_pow = Matrix::from_fn(d, m, |r, c| at[(r, c)].powf(k));
        let b_pow: Vec<f64> = b.iter().map(|v| v.powf(k)).collect();
        let inner = a.mat_vec(&at_pow.mat_vec(&b_pow));
        for l in 0..m {
            let rhs = inner[l] * s[l];
            worst = worst.max((lhs[l] - rhs).abs() / lhs[l].abs().max(f64::MIN_POSITIVE));
        }
        if k == 1.0 && s.iter().any(|&v| v != 1.0) {
            unit_at_one = false;
        }
    }
    check(
        worst <= 1e-10 && unit_at_one,
        format!("max relative error {worst:.1e}, unit vector at k=1: {unit_at_one}"),
    )
}

fn convexity() -> Outcome {
    let grid: Vec<f64> = (0..=400).map(|i| -2.0 + 0.01 * i as f64).collect();
    let mut failures = Vec::new();
    let mut worst = f64::INFINITY;
    for k in [1.0, 1.1, 1.5, 2.0, 3.0] {
        for eps in [1e-6, 1e-4, 1e-2] {
            if !convexity_check(k, eps, &grid) {
                failures.push(format!("k={k} eps={eps}"));
            }
            // Plain second differences of the summed measure.
            let params = MeasureParams::new(k)
                .and_then(|p| p.with_epsilon(eps))
                .map_err(|e| e.to_string())?;
            let g = |a: f64| k_measure_sum(&[a], &params).unwrap();
            let h = 1e-2;
            for &a in &grid {
                let second = (g(a + h) - 2.0 * g(a) + g(a - h)) / (h * h);
                worst = worst.min(second);
            }
        }
    }
    check(
        failures.is_empty() && worst >= -1e-8,
        format!("min second difference {worst:.3e}; failing cells {failures:?}"),
    )
}

fn variance_monte_carlo() -> Outcome {
    let mut rng = Rng::seed_from(505);
    let p = positive(10, 4, &mut rng);
    let alpha = [1.0, -0.5, 2.0, 0.25];
    let cfg = StretchConfig::regularized(1.5, 100.0).map_err(|e| e.to_string())?;
    let sigma = 0.3;
    let regime = Regime::for_shape(10, 4);
    let mc = monte_carlo(&p, &alpha, &cfg, regime, sigma, 20_000, DEFAULT_SEED)
        .map_err(|e| e.to_string())?;
    let expected = expected_estimate(&p, &alpha, &cfg, regime).map_err(|e| e.to_string())?;
    let noise = NoiseModel::Isotropic {
        sigma2: sigma * sigma,
    };
    let cov = estimator_covariance(&p, &cfg, &noise, regime).map_err(|e| e.to_string())?;
    let worst_z = (0..4)
        .map(|j| (mc.mean[j] - expected[j]).abs() / mc.std_error[j])
        .fold(0.0f64, f64::max);
    let rel = mc.covariance.sub(&cov).frobenius_norm() / cov.frobenius_norm();
    check(
        worst_z <= 3.0 && rel <= 0.05,
        format!("max |mean - E| / SE {worst_z:.2}, covariance relative error {rel:.3}"),
    )
}

fn classical_covariance() -> Outcome {
    let mut rng = Rng::seed_from(707);
    let p = positive(30, 4, &mut rng);
    let sigma2 = 0.04;
    let cfg = StretchConfig::regularized(2.0, 1e15).map_err(|e| e.to_string())?;
    let cov = estimator_covariance(&p, &cfg, &NoiseModel::Isotropic { sigma2 }, Regime::Over)
        .map_err(|e| e.to_string())?;
    let pn = to_na(&p);
    let oracle = (pn.transpose() * &pn)
        .try_inverse()
        .ok_or("singular P^T P")?
        * sigma2;
    let rel = (to_na(&cov) - &oracle).norm() / oracle.norm();
    check(rel <= 1e-5, format!("relative error {rel:.1e}"))
}

fn conditioning() -> Outcome {
    let p = seeded_positive_matrix(6, 30, SWEEP_FIXTURE_SEED);
    let sweep = condition_sweep(&p, &[1.05, 2.0, 10.0]).map_err(|e| e.to_string())?;
    let (lo, mid, hi) = (sweep[0].1, sweep[1].1, sweep[2].1);
    check(
        lo > mid && hi > mid,
        format!(
            "cond {lo:.1} at k=1.05, {mid:.1} at k=2, {hi:.1} at k=10 (seed {SWEEP_FIXTURE_SEED})"
        ),
    )
}

fn basis_counts() -> Outcome {
    let x = Matrix::from_fn(3, 2, |r, c| 0.1 + 0.1 * (r + c) as f64);
    let c3 = BasisSpec::poly2(3)
        .expand(&x)
        .map_err(|e| e.to_string())?
        .cols();
    let c28 = BasisSpec::poly2(28)
        .expand(&x)
        .map_err(|e| e.to_string())?
        .cols();
    check(
        c3 == 10
            && c28 == 435
            && bivariate_column_count(3) == 10
            && bivariate_column_count(28) == 435,
        format!("order 3: {c3} columns, order 28: {c28} columns"),
    )
}

fn ranking_statistics() -> Outcome {
    // Positives: 1 of 4 wrong. Negatives: 2 of 4 wrong.
    let target = [1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0];
    let pred = [1.0, 1.0, 1.0, -1.0, -1.0, -1.0, 1.0, 1.0];
    let b = ber(&pred, &target).map_err(|e| e.to_string())?;

    let scores = Matrix::from_rows(&[
        [0.1, 0.2, 0.3],
        [0.2, 0.4, 0.6],
        [1.0, 2.0, 3.0],
        [0.5, 0.6, 0.9],
    ])
    .map_err(|e| e.to_string())?;
    let table = RankTable::new(scores).map_err(|e| e.to_string())?;
    let fr = friedman_test(&table).map_err(|e| e.to_string())?;
    // Two degrees of freedom: the survival function is exp(-x / 2).
    let p_oracle = (-fr.statistic / 2.0).exp();
    let cd = nemenyi_cd(2, 10, NemenyiAlpha::P05).map_err(|e| e.to_string())?;
    check(
        b == 0.375
            && (fr.statistic - 8.0).abs() <= 1e-12
            && (fr.p_value - p_oracle).abs() <= 1e-6
            && (cd - 0.6198).abs() <= 0.0005,
        format!(
            "BER {b}, Friedman {:.6} p={:.6} (oracle {p_oracle:.6}), CD {cd:.4}",
            fr.statistic, fr.p_value
        ),
    )
}

fn bench_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = dir.path().join("bench.toml");
    fs::write(
        &manifest,
        r#"output_dir = "out"
seed = 11
trials = 3
folds = 2

[[datasets]]
name = "curve"
synth = { kind = "poly1d", n = 30, sigma = 0.05 }

[[algorithms]]
name = "sr"
basis = "poly:4"
k = [1.5]
c = [100, "exact"]
"#,
    )
    .map_err(|e| e.to_string())?;
    let mut summaries = Vec::new();
    for _ in 0..2 {
        let status = Command::new(env!("CARGO_BIN_EXE_stretchy"))
            .arg("bench")
            .arg(&manifest)
            .env_remove("SR_SEED")
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!(
                "bench failed: {}",
                String::from_utf8_lossy(&status.stderr)
            ));
        }
        summaries.push(fs::read(dir.path().join("out/summary.csv")).map_err(|e| e.to_string())?);
    }
    let rows = String::from_utf8_lossy(&summaries[0]).lines().count() - 1;
    check(
        summaries[0] == summaries[1] && rows == 2,
        format!(
            "{rows} summary rows, identical: {}",
            summaries[0] == summaries[1]
        ),
    )
}

fn two_pass() -> Outcome {
    let mut rng = Rng::seed_from(808);
    let x = Matrix::from_fn(20, 1, |_, _| rng.uniform_range(0.1, 0.5));
    let y: Vec<f64> = (0..20)
        .map(|i| 50.0 + x[(i, 0)] + 0.01 * rng.standard_normal())
        .collect();
    let stretch = StretchConfig::regularized(1.5, 100.0).map_err(|e| e.to_string())?;
    let spec = ModelSpec::new(BasisSpec::poly(9), stretch);

    let full = fit(&x, &y, &spec).map_err(|e| e.to_string())?;
    let design = spec.design(&x, None).map_err(|e| e.to_string())?;
    let single = solve_stretchy(&design, &y, &stretch).map_err(|e| e.to_string())?;
    let bitwise = full.alpha().len() == single.alpha.len()
        && full
            .alpha()
            .iter()
            .zip(single.alpha.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits());

    let half = fit(
        &x,
        &y,
        &spec.clone().with_density(0.5).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let intercept = design.intercept_column();
    let has_intercept = intercept.is_some_and(|i| half.selected_columns.contains(&i));
    check(
        bitwise && full.n_basis == 10 && half.selected_columns.len() == 5 && has_intercept,
        format!(
            "density 1 bitwise: {bitwise}; density 0.5 kept {:?} of {} (intercept {:?})",
            half.selected_columns, half.n_basis, intercept
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome, Option<u64>);

fn main() {
    let criteria: [Criterion; 14] = [
        (
            "k=2 reduction to least-norm and ridge",
            k2_reduction,
            Some(5),
        ),
        (
            "primal and dual forms agree",
            primal_dual_agreement,
            Some(5),
        ),
        ("exact mode interpolates", exact_interpolation, None),
        (
            "noiseless polynomial coefficients",
            table_reproduction,
            Some(1),
        ),
        ("sparsity grows as k approaches 1", sparsity_trend, None),
        ("scaling-vector identity", scaling_identity, Some(10)),
        ("k-measure convexity", convexity, None),
        (
            "Monte-Carlo mean and covariance",
            variance_monte_carlo,
            Some(60),
        ),
        ("classical covariance at k=2", classical_covariance, None),
        ("conditioning diagnostic", conditioning, None),
        ("bivariate basis counts", basis_counts, None),
        ("BER, Friedman and Nemenyi", ranking_statistics, None),
        ("benchmark determinism", bench_determinism, None),
        ("two-pass estimator", two_pass, None),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let outcome = match limit {
            Some(secs) => within_time(outcome, start.elapsed(), Duration::from_secs(*secs)),
            None => outcome,
        };
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
