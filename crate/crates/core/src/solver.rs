//! Closed-form estimators.
//!
//! With `S = (P^T)^(1/(k-1))` taken elementwise and `K = P S`:
//!
//! ```text
//! dual, exact         alpha = S K^{-1} y
//! dual, regularized   alpha = S (K + I/(c k))^{-1} y
//! primal              alpha = (S P + I/(c k))^{-1} S y
//! ```
//!
//! At `k = 2` the stretch is the plain transpose and these reduce to the
//! minimum-norm solution and ridge regression with `lambda = 1/(2c)`.
//! The dual multipliers `beta` are kept so callers can check that `alpha`
//! lies in the column space of `S`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    as_nonnegative_integer, condition_number, elementwise_power, Lu, Matrix, Vector, DEFAULT_RCOND,
    INTEGER_EXPONENT_TOL,
};

/// How strongly the fit is regularized. `Exact` is the `c -> infinity` limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Regularization {
    Exact,
    Regularized { c: f64 },
}

impl Regularization {
    /// The diagonal shift `1/(c k)`, zero in exact mode.
    pub fn ridge_shift(&self, k: f64) -> f64 {
        match *self {
            Regularization::Exact => 0.0,
            Regularization::Regularized { c } => 1.0 / (c * k),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Regularization::Exact)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StretchConfig {
    pub k: f64,
    pub reg: Regularization,
    pub rcond_threshold: f64,
}

impl StretchConfig {
    pub fn new(k: f64, reg: Regularization) -> Result<Self> {
        validate_k(k)?;
        if let Regularization::Regularized { c } = reg {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "regularization parameter c must be positive and finite, got {c}"
                )));
            }
        }
        Ok(StretchConfig {
            k,
            reg,
            rcond_threshold: DEFAULT_RCOND,
        })
    }

    pub fn exact(k: f64) -> Result<Self> {
        StretchConfig::new(k, Regularization::Exact)
    }

    pub fn regularized(k: f64, c: f64) -> Result<Self> {
        StretchConfig::new(k, Regularization::Regularized { c })
    }

    pub fn with_rcond(mut self, rcond: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rcond) {
            return Err(Error::InvalidParameter(format!(
                "rcond threshold must lie in [0, 1), got {rcond}"
            )));
        }
        self.rcond_threshold = rcond;
        Ok(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverForm {
    DualExact,
    DualRegularized,
    PrimalExact,
    PrimalRegularized,
    Ridge,
    LeastNorm,
}

impl SolverForm {
    pub fn is_dual(&self) -> bool {
        matches!(
            self,
            SolverForm::DualExact | SolverForm::DualRegularized | SolverForm::LeastNorm
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedCoefficients {
    pub alpha: Vector,
    /// Dual multipliers, present for dual-form solves.
    pub beta: Option<Vector>,
    pub solver_form: SolverForm,
    /// 2-norm condition number of the matrix that was factorized.
    #[serde(with = "extended_f64")]
    pub condition_report: f64,
}

/// JSON has no infinities; these are written as the strings `"inf"`,
/// `"-inf"` and `"nan"`.
mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string().to_lowercase())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn validate_k(k: f64) -> Result<()> {
    if !(k > 1.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "stretch exponent k must satisfy 1 < k < inf, got {k}"
        )));
    }
    Ok(())
}

/// The elementwise exponent `1/(k-1)` applied to `P^T`.
pub fn stretch_exponent(k: f64) -> f64 {
    1.0 / (k - 1.0)
}

/// `(P^T)` raised elementwise to `1/(k-1)`.
///
/// Any `k` other than 2 requires a strictly positive design, even when the
/// exponent happens to be an integer.
pub fn stretch_matrix(p: &Matrix, k: f64) -> Result<Matrix> {
    validate_k(k)?;
    let e = stretch_exponent(k);
    if as_nonnegative_integer(e) == Some(1) && (e - 1.0).abs() <= INTEGER_EXPONENT_TOL {
        return Ok(p.transpose());
    }
    if let Some(pos) = p.as_slice().iter().position(|&v| v <= 0.0) {
        return Err(Error::NegativeBase {
            row: pos / p.cols(),
            col: pos % p.cols(),
            value: p.as_slice()[pos],
        });
    }
    elementwise_power(&p.transpose(), e)
}

fn check_targets(p: &Matrix, y: &[f64]) -> Result<()> {
    if y.len() != p.rows() {
        return Err(Error::DimensionMismatch {
            context: "targets",
            expected: p.rows(),
            found: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets"));
    }
    Ok(())
}

fn factor_system(system: &Matrix, rcond: f64) -> Result<(Lu, f64)> {
    if !system.is_finite() {
        return Err(Error::NonFinite("system matrix"));
    }
    let lu = Lu::factor(system, rcond)?;
    Ok((lu, condition_number(system)))
}

fn finite_alpha(alpha: Vector) -> Result<Vector> {
    if alpha.is_finite() {
        Ok(alpha)
    } else {
        Err(Error::NonFinite("coefficients"))
    }
}

/// Dual-form stretchy solve (outer-product system, suited to `M < D`).
pub fn solve_dual(p: &Matrix, y: &[f64], cfg: &StretchConfig) -> Result<FittedCoefficients> {
    check_targets(p, y)?;
    let s = stretch_matrix(p, cfg.k)?;
    let mut system = p.matmul(&s);
    let shift = cfg.reg.ridge_shift(cfg.k);
    if shift > 0.0 {
        system = system.add_diagonal(shift);
    }
    let (lu, condition_report) = factor_system(&system, cfg.rcond_threshold)?;
    let beta = lu.solve(y)?;
    let alpha = finite_alpha(s.mat_vec(&beta))?;
    Ok(FittedCoefficients {
        alpha,
        beta: Some(beta),
        solver_form: if cfg.reg.is_exact() {
            SolverForm::DualExact
        } else {
            SolverForm::DualRegularized
        },
        condition_report,
    })
}

/// Primal-form stretchy solve (inner-product system, suited to `M >= D`).
/// In exact mode the diagonal shift is dropped.
pub fn solve_primal(p: &Matrix, y: &[f64], cfg: &StretchConfig) -> Result<FittedCoefficients> {
    check_targets(p, y)?;
    let s = stretch_matrix(p, cfg.k)?;
    let mut system = s.matmul(p);
    let shift = cfg.reg.ridge_shift(cfg.k);
    if shift > 0.0 {
        system = system.add_diagonal(shift);
    }
    let (lu, condition_report) = factor_system(&system, cfg.rcond_threshold)?;
    let alpha = finite_alpha(lu.solve(&s.mat_vec(y))?)?;
    Ok(FittedCoefficients {
        alpha,
        beta: None,
        solver_form: if cfg.reg.is_exact() {
            SolverForm::PrimalExact
        } else {
            SolverForm::PrimalRegularized
        },
        condition_report,
    })
}

/// Dual form when the system is under-determined, primal otherwise.
pub fn solve_stretchy(p: &Matrix, y: &[f64], cfg: &StretchConfig) -> Result<FittedCoefficients> {
    if p.rows() < p.cols() {
        solve_dual(p, y, cfg)
    } else {
        solve_primal(p, y, cfg)
    }
}

pub fn solve_dual_exact(p: &Matrix, y: &[f64], k: f64) -> Result<FittedCoefficients> {
    solve_dual(p, y, &StretchConfig::exact(k)?)
}

pub fn solve_dual_regularized(p: &Matrix, y: &[f64], k: f64, c: f64) -> Result<FittedCoefficients> {
    solve_dual(p, y, &StretchConfig::regularized(k, c)?)
}

pub fn solve_primal_regularized(
    p: &Matrix,
    y: &[f64],
    k: f64,
    c: f64,
) -> Result<FittedCoefficients> {
    solve_primal(p, y, &StretchConfig::regularized(k, c)?)
}

/// Ridge regression `(P^T P + lambda I)^{-1} P^T y`.
pub fn ridge(p: &Matrix, y: &[f64], lambda: f64) -> Result<FittedCoefficients> {
    check_targets(p, y)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "ridge penalty must be non-negative, got {lambda}"
        )));
    }
    let pt = p.transpose();
    let mut system = pt.matmul(p);
    if lambda > 0.0 {
        system = system.add_diagonal(lambda);
    }
    let (lu, condition_report) = factor_system(&system, DEFAULT_RCOND)?;
    let alpha = finite_alpha(lu.solve(&pt.mat_vec(y))?)?;
    Ok(FittedCoefficients {
        alpha,
        beta: None,
        solver_form: SolverForm::Ridge,
        condition_report,
    })
}

/// Minimum-norm interpolant `P^T (P P^T)^{-1} y`.
pub fn least_norm(p: &Matrix, y: &[f64]) -> Result<FittedCoefficients> {
    check_targets(p, y)?;
    let pt = p.transpose();
    let system = p.matmul(&pt);
    let (lu, condition_report) = factor_system(&system, DEFAULT_RCOND)?;
    let beta = lu.solve(y)?;
    let alpha = finite_alpha(pt.mat_vec(&beta))?;
    Ok(FittedCoefficients {
        alpha,
        beta: Some(beta),
        solver_form: SolverForm::LeastNorm,
        condition_report,
    })
}

/// `||P alpha - y||_2`.
pub fn residual_norm(p: &Matrix, alpha: &[f64], y: &[f64]) -> f64 {
    p.mat_vec(alpha).sub(y).norm2()
}

fn real_power(x: f64, k: f64, row: usize, col: usize) -> Result<f64> {
    match as_nonnegative_integer(k) {
        Some(n) => Ok(x.powi(n)),
        None if x > 0.0 => Ok(x.powf(k)),
        None => Err(Error::NegativeBase { row, col, value: x }),
    }
}

/// The correction vector `s` with `A (A^T b)^k = (A (A^T)^k b^k) o s`,
/// all powers elementwise.
///
/// For an `m x d` matrix `A` and `b` of length `m`,
/// `s_l = sum_j a_lj (sum_i a_ij b_i)^k / sum_j a_lj sum_i a_ij^k b_i^k`.
pub fn scaling_vector(a: &Matrix, b: &[f64], k: f64) -> Result<Vector> {
    let (m, d) = a.shape();
    if b.len() != m {
        return Err(Error::DimensionMismatch {
            context: "scaling vector",
            expected: m,
            found: b.len(),
        });
    }
    if !k.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "exponent {k} is not finite"
        )));
    }
    let mut projected_pow = Vec::with_capacity(d);
    let mut powered_proj = Vec::with_capacity(d);
    for j in 0..d {
        let mut lin = 0.0;
        let mut pow = 0.0;
        for (i, &bi) in b.iter().enumerate() {
            let aij = a[(i, j)];
            lin += aij * bi;
            pow += real_power(aij, k, i, j)? * real_power(bi, k, i, 0)?;
        }
        projected_pow.push(real_power(lin, k, j, 0)?);
        powered_proj.push(pow);
    }
    (0..m)
        .map(|l| {
            let row = a.row(l);
            let num: f64 = row.iter().zip(&projected_pow).map(|(x, y)| x * y).sum();
            let den: f64 = row.iter().zip(&powered_proj).map(|(x, y)| x * y).sum();
            if !(den.abs() > 1e-300) {
                return Err(Error::ZeroDenominator { row: l });
            }
            Ok(num / den)
        })
        .collect()
}
