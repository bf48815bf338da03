use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context, Result};
use stretchy_core::data::{
    load_csv, load_model, load_table, save_csv, save_model, synthesize, write_column_csv,
    TargetColumn,
};
use stretchy_core::estimator::{classify, fit as fit_model, predict as predict_model, ModelSpec};
use stretchy_core::rng::DEFAULT_SEED;
use stretchy_core::variance::{
    bias_report, condition_sweep, estimator_covariance, seeded_positive_matrix, write_bias_csv,
    write_matrix_csv, write_sweep_csv, NoiseModel, Regime, SWEEP_FIXTURE_SEED,
};
use stretchy_core::{BasisSpec, Matrix, StretchConfig, SynthKind, SynthSpec, Vector};

use crate::{
    describe_reg, CondsweepArgs, DesignArgs, FitArgs, PredictArgs, SynthArgs, TransformArgs,
    VarianceArgs,
};

/// Coefficients at or above this magnitude count as nonzero in reports.
pub const NONZERO_THRESHOLD: f64 = 1e-8;

pub fn synth(args: &SynthArgs) -> Result<()> {
    let n = args.n.unwrap_or(match args.kind {
        SynthKind::Poly1d => 5,
        SynthKind::Twoclass2d => 20,
    });
    let spec = SynthSpec::new(args.kind, n, args.sigma, args.seed)?;
    let data = synthesize(&spec);
    save_csv(&args.out, &data).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} rows x {} features ({}) to {}",
        data.n_samples(),
        data.n_features(),
        args.kind,
        args.out.display()
    );
    Ok(())
}

/// Builds a model specification from transform flags.
pub fn model_spec(
    basis: BasisSpec,
    stretch: StretchConfig,
    density: f64,
    transform: &TransformArgs,
    n_features: usize,
) -> Result<ModelSpec> {
    let mut spec = ModelSpec::new(basis, stretch)
        .with_density(density)?
        .with_standardize(transform.standardize || transform.quadrant_map);
    if transform.quadrant_map {
        let b = transform.b.as_ref().map(|list| match list.0.as_slice() {
            [single] => Vector::filled(n_features, *single),
            many => Vector::from(many),
        });
        spec = spec.with_quadrant(transform.a, b)?;
    } else if transform.b.is_some() {
        bail!("--b only applies together with --quadrant-map");
    }
    Ok(spec)
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let data = load_csv(
        &args.train,
        &TargetColumn::Name(args.target.clone()),
        args.task,
    )
    .with_context(|| format!("loading {}", args.train.display()))?;
    let stretch = args.stretch.config()?;
    let spec = model_spec(
        args.basis,
        stretch,
        args.density,
        &args.transform,
        data.n_features(),
    )?;
    let model = fit_model(&data.features, &data.targets, &spec)?;
    save_model(&args.model_out, &model)
        .with_context(|| format!("writing {}", args.model_out.display()))?;

    let coef = &model.coefficients;
    println!("samples: {}", data.n_samples());
    println!("basis_columns: {}", model.n_basis);
    println!("solver_form: {}", serde_plain_form(&coef.solver_form));
    println!("k: {}", stretch.k);
    println!("c: {}", describe_reg(&stretch.reg));
    println!("condition: {:e}", coef.condition_report);
    println!("residual: {:e}", model.residual);
    println!("retained_columns: {}", model.selected_columns.len());
    println!(
        "nonzero_coefficients: {}",
        model.nonzero_count(NONZERO_THRESHOLD)
    );
    println!("model: {}", args.model_out.display());
    Ok(())
}

fn serde_plain_form(form: &stretchy_core::SolverForm) -> String {
    use stretchy_core::SolverForm as F;
    match form {
        F::DualExact => "dual_exact",
        F::DualRegularized => "dual_regularized",
        F::PrimalExact => "primal_exact",
        F::PrimalRegularized => "primal_regularized",
        F::Ridge => "ridge",
        F::LeastNorm => "least_norm",
    }
    .into()
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    let model = load_model(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    let (names, table) =
        load_table(&args.input).with_context(|| format!("loading {}", args.input.display()))?;
    let x = match &args.target {
        Some(t) => {
            let idx = names
                .iter()
                .position(|n| n == t)
                .ok_or_else(|| stretchy_core::Error::MissingTarget(t.clone()))?;
            let keep: Vec<usize> = (0..names.len()).filter(|&c| c != idx).collect();
            table.select_columns(&keep)
        }
        None => table,
    };
    if x.cols() != model.n_features {
        bail!(
            "input has {} feature columns but the model expects {}; pass --target to drop the target column",
            x.cols(),
            model.n_features
        );
    }
    let (name, values) = if args.classify {
        ("label", classify(&model, &x)?)
    } else {
        ("prediction", predict_model(&model, &x)?)
    };
    let file = BufWriter::new(File::create(&args.out)?);
    write_column_csv(file, name, &values)?;
    println!("wrote {} {}s to {}", values.len(), name, args.out.display());
    Ok(())
}

fn design_matrix(args: &DesignArgs, rows: usize, cols: usize, seed: u64) -> Result<Matrix> {
    if let Some(path) = &args.input {
        if args.rows.is_some() || args.cols.is_some() {
            bail!("--rows/--cols cannot be combined with --input");
        }
        let (_, m) = load_table(path).with_context(|| format!("loading {}", path.display()))?;
        return Ok(m);
    }
    let rows = args.rows.unwrap_or(rows);
    let cols = args.cols.unwrap_or(cols);
    if rows == 0 || cols == 0 {
        bail!("--rows and --cols must be positive");
    }
    Ok(seeded_positive_matrix(
        rows,
        cols,
        args.seed.unwrap_or(seed),
    ))
}

pub fn condsweep(args: &CondsweepArgs) -> Result<()> {
    let p = design_matrix(&args.design, 6, 30, SWEEP_FIXTURE_SEED)?;
    let sweep = condition_sweep(&p, &args.k_grid.0)?;
    write_sweep_csv(BufWriter::new(File::create(&args.out)?), &sweep)?;
    for (k, cond) in &sweep {
        println!("k={k} cond={cond:e}");
    }
    println!("wrote {} rows to {}", sweep.len(), args.out.display());
    Ok(())
}

pub fn variance(args: &VarianceArgs) -> Result<()> {
    let p = design_matrix(&args.design, 30, 4, DEFAULT_SEED)?;
    let cfg = args.stretch.config()?;
    let alpha = match &args.alpha {
        Some(list) => Vector::from(list.0.as_slice()),
        None => Vector::filled(p.cols(), 1.0),
    };
    if !(args.sigma >= 0.0) {
        bail!("--sigma must be non-negative");
    }
    let regime = Regime::for_shape(p.rows(), p.cols());
    let bias = bias_report(&p, &alpha, &cfg, regime)?;
    let noise = NoiseModel::Isotropic {
        sigma2: args.sigma * args.sigma,
    };
    let cov = estimator_covariance(&p, &cfg, &noise, regime)?;

    fs::create_dir_all(&args.out_dir)?;
    write_to(&args.out_dir.join("bias.csv"), |w| write_bias_csv(w, &bias))?;
    write_to(&args.out_dir.join("covariance.csv"), |w| {
        write_matrix_csv(w, &cov)
    })?;
    println!(
        "regime: {}",
        if regime == Regime::Under {
            "under"
        } else {
            "over"
        }
    );
    println!("c: {}", describe_reg(&cfg.reg));
    println!("max_abs_bias: {:e}", bias.max_abs());
    println!("covariance_trace: {:e}", cov.trace());
    println!(
        "wrote bias.csv and covariance.csv to {}",
        args.out_dir.display()
    );
    Ok(())
}

fn write_to(
    path: &Path,
    f: impl FnOnce(BufWriter<File>) -> stretchy_core::Result<()>,
) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    f(file).with_context(|| format!("writing {}", path.display()))
}
