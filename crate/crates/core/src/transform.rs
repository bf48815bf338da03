//! Input transforms and basis expansion.
//!
//! The design matrix is assembled in a fixed order: z-score standardization
//! with training statistics, then the exponential first-quadrant map
//! `exp(a * x + b_j)`, then the basis expansion.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Slope used for the first-quadrant map unless told otherwise.
pub const NOMINAL_SLOPE: f64 = -0.2;

/// Per-feature standardization statistics plus the quadrant-map constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformParams {
    pub means: Vector,
    pub stds: Vector,
    pub a: f64,
    pub b: Vector,
}

impl TransformParams {
    /// Pass-through statistics (mean 0, std 1) for `d` features.
    pub fn identity(d: usize, a: f64) -> Self {
        TransformParams {
            means: Vector::zeros(d),
            stds: Vector::filled(d, 1.0),
            a,
            b: Vector::zeros(d),
        }
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn with_quadrant(mut self, a: f64, b: Option<Vector>) -> Result<Self> {
        let d = self.n_features();
        let b = b.unwrap_or_else(|| Vector::zeros(d));
        if b.len() != d {
            return Err(Error::DimensionMismatch {
                context: "quadrant map offsets",
                expected: d,
                found: b.len(),
            });
        }
        self.a = a;
        self.b = b;
        Ok(self)
    }
}

/// Column means and standard deviations (denominator `M - 1`).
pub fn zscore_fit(x_raw: &Matrix) -> Result<TransformParams> {
    let (m, d) = x_raw.shape();
    if m < 2 {
        return Err(Error::InsufficientSamples {
            required: 2,
            available: m,
        });
    }
    let mut means = Vec::with_capacity(d);
    let mut stds = Vec::with_capacity(d);
    for j in 0..d {
        let col = x_raw.column(j);
        let mean = col.iter().sum::<f64>() / m as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        let std = var.sqrt();
        if !(std > 0.0) || std <= f64::EPSILON * mean.abs() {
            return Err(Error::ZeroVariance { col: j });
        }
        means.push(mean);
        stds.push(std);
    }
    Ok(TransformParams {
        means: means.into(),
        stds: stds.into(),
        a: NOMINAL_SLOPE,
        b: Vector::zeros(d),
    })
}

pub fn zscore_apply(x_raw: &Matrix, params: &TransformParams) -> Result<Matrix> {
    check_features(x_raw, params.n_features())?;
    let out = Matrix::from_fn(x_raw.rows(), x_raw.cols(), |r, c| {
        (x_raw[(r, c)] - params.means[c]) / params.stds[c]
    });
    Ok(out)
}

/// Undoes [`zscore_apply`].
pub fn zscore_invert(x_std: &Matrix, params: &TransformParams) -> Result<Matrix> {
    check_features(x_std, params.n_features())?;
    Ok(Matrix::from_fn(x_std.rows(), x_std.cols(), |r, c| {
        x_std[(r, c)] * params.stds[c] + params.means[c]
    }))
}

/// Entry-wise `exp(a * x + b_j)`; every output is strictly positive.
pub fn quadrant_map(x_std: &Matrix, a: f64, b: &[f64]) -> Result<Matrix> {
    if a == 0.0 {
        return Err(Error::ZeroSlope);
    }
    if !a.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "quadrant slope {a} is not finite"
        )));
    }
    if b.len() != x_std.cols() {
        return Err(Error::DimensionMismatch {
            context: "quadrant map offsets",
            expected: x_std.cols(),
            found: b.len(),
        });
    }
    let out = Matrix::from_fn(x_std.rows(), x_std.cols(), |r, c| {
        (a * x_std[(r, c)] + b[c]).exp()
    });
    if !out.is_finite() {
        return Err(Error::NonFinite("quadrant map"));
    }
    // exp underflows to zero for very negative arguments
    if out.min_entry() <= 0.0 {
        return Err(Error::NonFinite("quadrant map underflow"));
    }
    Ok(out)
}

/// Columns `[1, x, x^2, ..., x^n]` (the leading 1 only with `intercept`).
pub fn poly_features_univariate(x: &[f64], order: usize, intercept: bool) -> Result<Matrix> {
    if x.is_empty() {
        return Err(Error::InvalidShape(
            "empty input to polynomial basis".into(),
        ));
    }
    let start = if intercept { 0 } else { 1 };
    let n_cols = order + 1 - start;
    if n_cols == 0 {
        return Err(Error::InvalidShape(
            "polynomial basis with no columns".into(),
        ));
    }
    let m = Matrix::from_fn(x.len(), n_cols, |r, c| x[r].powi((c + start) as i32));
    if !m.is_finite() {
        return Err(Error::NonFinite("polynomial basis"));
    }
    Ok(m)
}

/// Exponent pairs `(i, j)` of the monomials `x1^i x2^j` with `i + j <= order`,
/// ordered by total degree and, within a degree, by descending power of `x1`.
pub fn bivariate_exponents(order: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity((order + 1) * (order + 2) / 2);
    for degree in 0..=order as u32 {
        for i in (0..=degree).rev() {
            out.push((i, degree - i));
        }
    }
    out
}

pub fn bivariate_column_count(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

/// All monomials of two variables up to total degree `order`.
pub fn poly_features_bivariate(x: &Matrix, order: usize, intercept: bool) -> Result<Matrix> {
    if x.cols() != 2 {
        return Err(Error::DimensionMismatch {
            context: "bivariate polynomial basis inputs",
            expected: 2,
            found: x.cols(),
        });
    }
    let mut exponents = bivariate_exponents(order);
    if !intercept {
        exponents.remove(0);
    }
    if exponents.is_empty() {
        return Err(Error::InvalidShape(
            "polynomial basis with no columns".into(),
        ));
    }
    let m = Matrix::from_fn(x.rows(), exponents.len(), |r, c| {
        let (i, j) = exponents[c];
        x[(r, 0)].powi(i as i32) * x[(r, 1)].powi(j as i32)
    });
    if !m.is_finite() {
        return Err(Error::NonFinite("polynomial basis"));
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Raw,
    PolyUnivariate,
    PolyBivariate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub order: usize,
    pub include_intercept: bool,
}

impl BasisSpec {
    pub fn raw() -> Self {
        BasisSpec {
            kind: BasisKind::Raw,
            order: 1,
            include_intercept: true,
        }
    }

    pub fn poly(order: usize) -> Self {
        BasisSpec {
            kind: BasisKind::PolyUnivariate,
            order,
            include_intercept: true,
        }
    }

    pub fn poly2(order: usize) -> Self {
        BasisSpec {
            kind: BasisKind::PolyBivariate,
            order,
            include_intercept: true,
        }
    }

    pub fn without_intercept(mut self) -> Self {
        self.include_intercept = false;
        self
    }

    /// Number of columns produced for `d` raw features.
    pub fn column_count(&self, d: usize) -> usize {
        let icpt = usize::from(self.include_intercept);
        match self.kind {
            BasisKind::Raw => d + icpt,
            BasisKind::PolyUnivariate => self.order + icpt,
            BasisKind::PolyBivariate => bivariate_column_count(self.order) - 1 + icpt,
        }
    }

    pub fn expand(&self, x: &Matrix) -> Result<Matrix> {
        match self.kind {
            BasisKind::Raw => {
                if !self.include_intercept {
                    return Ok(x.clone());
                }
                Ok(Matrix::from_fn(x.rows(), x.cols() + 1, |r, c| {
                    if c == 0 {
                        1.0
                    } else {
                        x[(r, c - 1)]
                    }
                }))
            }
            BasisKind::PolyUnivariate => {
                if x.cols() != 1 {
                    return Err(Error::DimensionMismatch {
                        context: "univariate polynomial basis inputs",
                        expected: 1,
                        found: x.cols(),
                    });
                }
                poly_features_univariate(&x.column(0), self.order, self.include_intercept)
            }
            BasisKind::PolyBivariate => {
                poly_features_bivariate(x, self.order, self.include_intercept)
            }
        }
    }
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            BasisKind::Raw => write!(f, "raw")?,
            BasisKind::PolyUnivariate => write!(f, "poly:{}", self.order)?,
            BasisKind::PolyBivariate => write!(f, "poly2:{}", self.order)?,
        }
        if !self.include_intercept {
            write!(f, ":nointercept")?;
        }
        Ok(())
    }
}

/// Parses `raw`, `poly:N` or `poly2:N`, optionally suffixed with `:nointercept`.
impl FromStr for BasisSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let kind = parts.next().unwrap_or_default();
        let mut spec = match kind {
            "raw" => BasisSpec::raw(),
            "poly" | "poly2" => {
                let order = parts
                    .next()
                    .and_then(|o| o.parse::<usize>().ok())
                    .ok_or_else(|| {
                        Error::InvalidParameter(format!("basis {s:?} needs an order"))
                    })?;
                if kind == "poly" {
                    BasisSpec::poly(order)
                } else {
                    BasisSpec::poly2(order)
                }
            }
            _ => return Err(Error::InvalidParameter(format!("unknown basis {s:?}"))),
        };
        match parts.next() {
            None => {}
            Some("nointercept") => spec.include_intercept = false,
            Some(other) => {
                return Err(Error::InvalidParameter(format!(
                    "unknown basis option {other:?}"
                )))
            }
        }
        Ok(spec)
    }
}

/// The basis-expanded design matrix `P` (rows are samples).
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    matrix: Matrix,
    all_positive: bool,
    intercept: Option<usize>,
}

impl DesignMatrix {
    pub fn new(matrix: Matrix) -> Self {
        let all_positive = matrix.min_entry() > 0.0;
        DesignMatrix {
            matrix,
            all_positive,
            intercept: None,
        }
    }

    pub fn with_intercept(mut self, column: usize) -> Self {
        self.intercept = Some(column);
        self
    }

    /// True when every entry is strictly positive.
    pub fn all_positive(&self) -> bool {
        self.all_positive
    }

    pub fn intercept_column(&self) -> Option<usize> {
        self.intercept
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    /// Restricts to the listed columns; the intercept index follows along.
    pub fn select_columns(&self, columns: &[usize]) -> DesignMatrix {
        let intercept = self
            .intercept
            .and_then(|i| columns.iter().position(|&c| c == i));
        DesignMatrix {
            matrix: self.matrix.select_columns(columns),
            all_positive: self.all_positive,
            intercept,
        }
    }
}

impl Deref for DesignMatrix {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.matrix
    }
}

/// Standardize (when `params` is given), map into the first quadrant (when
/// enabled) and expand into the basis.
pub fn build_design(
    x_raw: &Matrix,
    params: Option<&TransformParams>,
    basis: &BasisSpec,
    use_quadrant_map: bool,
) -> Result<DesignMatrix> {
    let mut x = match params {
        Some(p) => zscore_apply(x_raw, p)?,
        None => x_raw.clone(),
    };
    if use_quadrant_map {
        let p = params.ok_or_else(|| {
            Error::InvalidParameter("quadrant map enabled without transform parameters".into())
        })?;
        x = quadrant_map(&x, p.a, &p.b)?;
    }
    let p = basis.expand(&x)?;
    let design = DesignMatrix::new(p);
    Ok(if basis.include_intercept {
        design.with_intercept(0)
    } else {
        design
    })
}

fn check_features(x: &Matrix, expected: usize) -> Result<()> {
    if x.cols() != expected {
        return Err(Error::DimensionMismatch {
            context: "feature count",
            expected,
            found: x.cols(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn zscore_hand_example() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let p = zscore_fit(&x).unwrap();
        assert_eq!(p.means[0], 2.0);
        assert_eq!(p.stds[0], 1.0);
    }

    #[test]
    fn zscore_constant_column() {
        let x = Matrix::from_rows(&[[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]).unwrap();
        assert!(matches!(
            zscore_fit(&x),
            Err(Error::ZeroVariance { col: 1 })
        ));
    }

    #[test]
    fn zscore_needs_two_rows() {
        let x = Matrix::from_rows(&[[1.0]]).unwrap();
        assert!(matches!(
            zscore_fit(&x),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn zscore_self_application() {
        let mut rng = Rng::seed_from(3);
        let x = Matrix::from_fn(100, 3, |_, c| {
            rng.normal(c as f64 * 4.0 - 2.0, 1.0 + c as f64)
        });
        let p = zscore_fit(&x).unwrap();
        let z = zscore_apply(&x, &p).unwrap();
        for c in 0..3 {
            let col = z.column(c);
            let mean = col.iter().sum::<f64>() / 100.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 99.0;
            assert!(mean.abs() < 1e-10);
            assert!((var.sqrt() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zscore_apply_rows() {
        let p = TransformParams {
            means: vec![1.0, -2.0].into(),
            stds: vec![2.0, 0.5].into(),
            a: -0.2,
            b: Vector::zeros(2),
        };
        let x = Matrix::from_rows(&[[1.0, -2.0], [3.0, -1.5]]).unwrap();
        let z = zscore_apply(&x, &p).unwrap();
        assert_eq!(z.row(0), &[0.0, 0.0]);
        assert_eq!(z.row(1), &[1.0, 1.0]);
        let bad = Matrix::from_rows(&[[1.0]]).unwrap();
        assert!(matches!(
            zscore_apply(&bad, &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zscore_held_out_is_affine() {
        let train = Matrix::from_rows(&[[0.0], [2.0], [4.0]]).unwrap();
        let p = zscore_fit(&train).unwrap();
        let test = Matrix::from_rows(&[[10.0], [-6.0]]).unwrap();
        let z = zscore_apply(&test, &p).unwrap();
        // mean 2, std 2
        assert_eq!(z.column(0).as_slice(), &[4.0, -4.0]);
    }

    #[test]
    fn quadrant_map_values() {
        let x = Matrix::from_rows(&[[-1.0], [0.0], [1.0]]).unwrap();
        let q = quadrant_map(&x, -0.2, &[0.0]).unwrap();
        assert_eq!(q[(1, 0)], 1.0);
        assert!((q[(0, 0)] - 0.2_f64.exp()).abs() < 1e-15);
        assert!((q[(2, 0)] - (-0.2_f64).exp()).abs() < 1e-15);
        assert!(q[(0, 0)] > q[(1, 0)] && q[(1, 0)] > q[(2, 0)]);
        assert!(matches!(
            quadrant_map(&x, 0.0, &[0.0]),
            Err(Error::ZeroSlope)
        ));
    }

    #[test]
    fn univariate_basis() {
        let m = poly_features_univariate(&[0.1, 0.2], 10, true).unwrap();
        assert_eq!(m.cols(), 11);
        let m = poly_features_univariate(&[3.0, -1.0], 0, true).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 1.0]);
        let m = poly_features_univariate(&[2.0], 3, true).unwrap();
        assert_eq!(m.row(0), &[1.0, 2.0, 4.0, 8.0]);
        let m = poly_features_univariate(&[2.0], 3, false).unwrap();
        assert_eq!(m.row(0), &[2.0, 4.0, 8.0]);
    }

    #[test]
    fn bivariate_basis() {
        let x = Matrix::from_rows(&[[2.0, 3.0]]).unwrap();
        assert_eq!(
            poly_features_bivariate(&x, 1, true).unwrap().row(0),
            &[1.0, 2.0, 3.0]
        );
        let m = poly_features_bivariate(&x, 2, true).unwrap();
        assert_eq!(m.row(0), &[1.0, 2.0, 3.0, 4.0, 6.0, 9.0]);
        assert_eq!(poly_features_bivariate(&x, 3, true).unwrap().cols(), 10);
        let wide = Matrix::from_rows(&[[1.0, 1.0, 1.0]]).unwrap();
        assert!(matches!(
            poly_features_bivariate(&wide, 2, true),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn basis_parsing() {
        assert_eq!("poly:10".parse::<BasisSpec>().unwrap(), BasisSpec::poly(10));
        assert_eq!(
            "poly2:28".parse::<BasisSpec>().unwrap(),
            BasisSpec::poly2(28)
        );
        assert_eq!("raw".parse::<BasisSpec>().unwrap(), BasisSpec::raw());
        assert_eq!(
            "poly:3:nointercept".parse::<BasisSpec>().unwrap(),
            BasisSpec::poly(3).without_intercept()
        );
        assert!("poly".parse::<BasisSpec>().is_err());
        assert!("spline:3".parse::<BasisSpec>().is_err());
        for s in ["raw", "poly:4", "poly2:3:nointercept"] {
            assert_eq!(s.parse::<BasisSpec>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn design_positivity_flag() {
        let x = Matrix::from_rows(&[[0.1], [0.5]]).unwrap();
        let d = build_design(&x, None, &BasisSpec::poly(3), false).unwrap();
        assert!(d.all_positive());
        assert_eq!(d.intercept_column(), Some(0));

        let x = Matrix::from_rows(&[[-1.0, 4.0], [2.0, -3.0], [0.5, 1.0]]).unwrap();
        let raw = build_design(&x, None, &BasisSpec::raw(), false).unwrap();
        assert!(!raw.all_positive());
        let p = zscore_fit(&x).unwrap();
        let mapped = build_design(&x, Some(&p), &BasisSpec::raw(), true).unwrap();
        assert!(mapped.all_positive());
    }

    #[test]
    fn design_nominal_pipeline() {
        let x = Matrix::from_rows(&[[1.0, 10.0], [2.0, 30.0], [3.0, 20.0]]).unwrap();
        let p = zscore_fit(&x).unwrap();
        assert_eq!(p.a, NOMINAL_SLOPE);
        let d = build_design(&x, Some(&p), &BasisSpec::raw(), true).unwrap();
        let z = zscore_apply(&x, &p).unwrap();
        for r in 0..3 {
            assert_eq!(d[(r, 0)], 1.0);
            for c in 0..2 {
                assert_eq!(d[(r, c + 1)], (-0.2 * z[(r, c)]).exp());
            }
        }
    }

    #[test]
    fn quadrant_without_params_is_rejected() {
        let x = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        assert!(build_design(&x, None, &BasisSpec::raw(), true).is_err());
    }
}
