//! Smooth surrogates for the lp norm.
//!
//! The absolute value is replaced by `f(x) = sqrt(x^2 + eps)`, giving the
//! differentiable k-measure `(sum f(v_j)^k)^(1/k)`. Nothing in the solvers
//! depends on this module: they work in the `eps -> 0` limit, so these
//! functions serve as diagnostics and for checking convexity numerically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-4;

/// Step used by [`convexity_check`] for its centered second difference.
pub const CONVEXITY_STEP: f64 = 1e-4;

/// Most negative second difference still accepted as convex.
pub const CONVEXITY_TOLERANCE: f64 = -1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureParams {
    pub k: f64,
    pub epsilon: f64,
    /// Outer exponent applied to the k-measure; defaults to `k`.
    pub q: f64,
}

impl MeasureParams {
    pub fn new(k: f64) -> Result<Self> {
        MeasureParams {
            k,
            epsilon: DEFAULT_EPSILON,
            q: k,
        }
        .validated()
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        self.epsilon = epsilon;
        self.validated()
    }

    pub fn with_q(mut self, q: f64) -> Result<Self> {
        self.q = q;
        self.validated()
    }

    fn validated(self) -> Result<Self> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidEpsilon(self.epsilon));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "k must be positive, got {}",
                self.k
            )));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "q must be positive, got {}",
                self.q
            )));
        }
        Ok(self)
    }
}

/// `sqrt(x^2 + epsilon)`.
pub fn smooth_abs(x: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    Ok((x * x + epsilon).sqrt())
}

/// `(sum |v_j|^p)^(1/p)`.
pub fn lp_norm(v: &[f64], p: f64) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidP(p));
    }
    let sum: f64 = v.iter().map(|x| x.abs().powf(p)).sum();
    Ok(sum.powf(1.0 / p))
}

/// Sum of `f(v_j)^k`, the k-powered measure.
pub fn k_measure_sum(v: &[f64], params: &MeasureParams) -> Result<f64> {
    let eps = params.epsilon;
    if !(eps > 0.0) {
        return Err(Error::InvalidEpsilon(eps));
    }
    // f^k = (x^2 + eps)^(k/2)
    let half_k = params.k / 2.0;
    Ok(v.iter().map(|x| (x * x + eps).powf(half_k)).sum())
}

pub fn k_measure(v: &[f64], params: &MeasureParams) -> Result<f64> {
    Ok(k_measure_sum(v, params)?.powf(1.0 / params.k))
}

/// The k-measure raised to the outer exponent `q`.
///
/// At `q = 1` this returns [`k_measure`] unchanged; at `q = k` it returns the
/// plain sum of `f(v_j)^k`.
pub fn k_measure_raised(v: &[f64], params: &MeasureParams) -> Result<f64> {
    if params.q == 1.0 {
        return k_measure(v, params);
    }
    if params.q == params.k {
        return k_measure_sum(v, params);
    }
    Ok(k_measure(v, params)?.powf(params.q))
}

/// Checks that `g(a) = f(a)^k` has a non-negative centered second difference
/// (within [`CONVEXITY_TOLERANCE`]) at every grid point.
pub fn convexity_check(k: f64, epsilon: f64, grid: &[f64]) -> bool {
    if !(epsilon > 0.0) || !(k >= 1.0) {
        return false;
    }
    let h = CONVEXITY_STEP;
    grid.iter().all(|&a| {
        let forward = power_increment(a, h, k, epsilon);
        let backward = -power_increment(a, -h, k, epsilon);
        let second = (forward - backward) / (h * h);
        second >= CONVEXITY_TOLERANCE
    })
}

/// `g(a + h) - g(a)` for `g(x) = (x^2 + eps)^(k/2)`, evaluated without
/// subtracting two nearly equal powers.
fn power_increment(a: f64, h: f64, k: f64, epsilon: f64) -> f64 {
    let base = a * a + epsilon;
    let delta = h * (2.0 * a + h);
    base.powf(k / 2.0) * ((k / 2.0) * (delta / base).ln_1p()).exp_m1()
}
