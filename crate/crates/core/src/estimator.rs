//! End-to-end model: transform, basis expansion, stretchy solve and the
//! two-pass feature-density selection.
//!
//! Pass 1 fits on every basis column. When `density < 1` the columns are
//! ranked by `|alpha_j|`, the top `max(1, round(density * D))` are kept (the
//! intercept is always kept) and the model is refit on those columns with the
//! same configuration and the same transform statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::solver::{residual_norm, solve_stretchy, FittedCoefficients, StretchConfig};
use crate::transform::{build_design, zscore_fit, BasisSpec, DesignMatrix, TransformParams};

/// Constants of the first-quadrant map `exp(a x + b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadrantSpec {
    pub a: f64,
    /// Per-feature offsets; zeros when absent.
    pub b: Option<Vector>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Z-score the raw features with training statistics.
    pub standardize: bool,
    pub quadrant: Option<QuadrantSpec>,
    pub basis: BasisSpec,
    pub stretch: StretchConfig,
    pub density: f64,
}

impl ModelSpec {
    pub fn new(basis: BasisSpec, stretch: StretchConfig) -> Self {
        ModelSpec {
            standardize: false,
            quadrant: None,
            basis,
            stretch,
            density: 1.0,
        }
    }

    pub fn with_density(mut self, density: f64) -> Result<Self> {
        validate_density(density)?;
        self.density = density;
        Ok(self)
    }

    pub fn with_standardize(mut self, standardize: bool) -> Self {
        self.standardize = standardize;
        self
    }

    pub fn with_quadrant(mut self, a: f64, b: Option<Vector>) -> Result<Self> {
        if a == 0.0 {
            return Err(Error::ZeroSlope);
        }
        if !a.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "quadrant slope {a} is not finite"
            )));
        }
        self.quadrant = Some(QuadrantSpec { a, b });
        Ok(self)
    }

    pub fn use_quadrant_map(&self) -> bool {
        self.quadrant.is_some()
    }

    /// Transform statistics learned from `x_raw`, or `None` when the spec
    /// applies neither standardization nor the quadrant map.
    pub fn fit_transform(&self, x_raw: &Matrix) -> Result<Option<TransformParams>> {
        let d = x_raw.cols();
        let params = match (self.standardize, &self.quadrant) {
            (false, None) => return Ok(None),
            (true, _) => zscore_fit(x_raw)?,
            (false, Some(q)) => TransformParams::identity(d, q.a),
        };
        Ok(Some(match &self.quadrant {
            Some(q) => params.with_quadrant(q.a, q.b.clone())?,
            None => params,
        }))
    }

    /// The design matrix for `x_raw` under previously fitted statistics.
    pub fn design(&self, x_raw: &Matrix, params: Option<&TransformParams>) -> Result<DesignMatrix> {
        build_design(x_raw, params, &self.basis, self.use_quadrant_map())
    }
}

fn validate_density(density: f64) -> Result<()> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidDensity(density));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub transform: Option<TransformParams>,
    pub n_features: usize,
    /// Column count of the full basis before selection.
    pub n_basis: usize,
    /// Retained basis columns, ascending.
    pub selected_columns: Vec<usize>,
    pub coefficients: FittedCoefficients,
    /// Whether every training design entry was strictly positive.
    pub training_positivity: bool,
    /// `||y - P alpha||` of the full-basis pass.
    pub pass1_residual: f64,
    /// `||y - P_sel alpha_sel||` of the returned fit.
    pub residual: f64,
}

impl FittedModel {
    pub fn alpha(&self) -> &Vector {
        &self.coefficients.alpha
    }

    /// Coefficients scattered back onto the full basis, zero where dropped.
    pub fn full_alpha(&self) -> Vector {
        let mut out = Vector::zeros(self.n_basis);
        for (&col, &a) in self
            .selected_columns
            .iter()
            .zip(self.coefficients.alpha.iter())
        {
            out[col] = a;
        }
        out
    }

    pub fn nonzero_count(&self, threshold: f64) -> usize {
        self.alpha().iter().filter(|a| a.abs() >= threshold).count()
    }
}

/// `max(1, round(density * d))` with halves rounded up, capped at `d`.
pub fn retained_count(density: f64, d: usize) -> usize {
    let n = (density * d as f64 + 0.5).floor() as usize;
    n.clamp(1, d.max(1))
}

/// Indices of the `count` largest `|alpha_j|` (ties to the lower index),
/// plus `intercept` if it missed the cut, returned ascending.
pub fn rank_columns(alpha: &[f64], count: usize, intercept: Option<usize>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..alpha.len()).collect();
    order.sort_by(|&i, &j| {
        alpha[j]
            .abs()
            .total_cmp(&alpha[i].abs())
            .then_with(|| i.cmp(&j))
    });
    let mut keep: Vec<usize> = order.into_iter().take(count).collect();
    if let Some(i) = intercept {
        if !keep.contains(&i) {
            keep.push(i);
        }
    }
    keep.sort_unstable();
    keep
}

pub fn fit(x_raw: &Matrix, y: &[f64], spec: &ModelSpec) -> Result<FittedModel> {
    validate_density(spec.density)?;
    if y.len() != x_raw.rows() {
        return Err(Error::DimensionMismatch {
            context: "targets",
            expected: x_raw.rows(),
            found: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets"));
    }

    let transform = spec.fit_transform(x_raw)?;
    let design = spec.design(x_raw, transform.as_ref())?;
    let n_basis = design.cols();
    let first = solve_stretchy(&design, y, &spec.stretch)?;
    let pass1_residual = residual_norm(&design, &first.alpha, y);

    let (selected_columns, coefficients, residual) = if spec.density >= 1.0 {
        ((0..n_basis).collect(), first, pass1_residual)
    } else {
        let count = retained_count(spec.density, n_basis);
        let cols = rank_columns(&first.alpha, count, design.intercept_column());
        let reduced = design.select_columns(&cols);
        let second = solve_stretchy(&reduced, y, &spec.stretch)?;
        let residual = residual_norm(&reduced, &second.alpha, y);
        (cols, second, residual)
    };

    Ok(FittedModel {
        spec: spec.clone(),
        transform,
        n_features: x_raw.cols(),
        n_basis,
        selected_columns,
        coefficients,
        training_positivity: design.all_positive(),
        pass1_residual,
        residual,
    })
}

pub fn predict(model: &FittedModel, x_raw: &Matrix) -> Result<Vector> {
    if x_raw.cols() != model.n_features {
        return Err(Error::DimensionMismatch {
            context: "feature count",
            expected: model.n_features,
            found: x_raw.cols(),
        });
    }
    let design = model.spec.design(x_raw, model.transform.as_ref())?;
    let p = if model.selected_columns.len() == design.cols() {
        design.into_matrix()
    } else {
        design.select_columns(&model.selected_columns).into_matrix()
    };
    Ok(p.mat_vec(model.alpha()))
}

/// Sign of a prediction with zero sent to `+1`.
pub fn label_of(prediction: f64) -> f64 {
    if prediction < 0.0 {
        -1.0
    } else {
        1.0
    }
}

pub fn classify(model: &FittedModel, x_raw: &Matrix) -> Result<Vector> {
    Ok(predict(model, x_raw)?
        .iter()
        .map(|&v| label_of(v))
        .collect())
}
