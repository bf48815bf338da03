//! Dense matrix primitives.
//!
//! Everything here is a small, self-contained row-major implementation. Linear
//! systems are always solved through an LU factorization with partial pivoting;
//! no routine in the crate forms an explicit inverse. Singular values and
//! symmetric eigenvalues are delegated to `nalgebra`.

use std::fmt;
use std::ops::{Deref, DerefMut, Index, IndexMut};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pivot-ratio threshold below which a factorization is declared singular.
pub const DEFAULT_RCOND: f64 = 1e-12;

/// Tolerance used to decide that an exponent is an integer.
pub const INTEGER_EXPONENT_TOL: f64 = 1e-12;

/// Smallest singular value treated as non-zero by [`condition_number`].
const SIGMA_FLOOR: f64 = 1e-300;

/// A real vector.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(data: Vec<f64>) -> Self {
        Vector(data)
    }

    pub fn zeros(len: usize) -> Self {
        Vector(vec![0.0; len])
    }

    pub fn filled(len: usize, value: f64) -> Self {
        Vector(vec![value; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        assert_eq!(self.len(), other.len(), "dot product length mismatch");
        self.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &[f64]) -> Vector {
        assert_eq!(self.len(), other.len(), "vector length mismatch");
        self.iter().zip(other).map(|(a, b)| a - b).collect()
    }

    pub fn add(&self, other: &[f64]) -> Vector {
        assert_eq!(self.len(), other.len(), "vector length mismatch");
        self.iter().zip(other).map(|(a, b)| a + b).collect()
    }

    pub fn scale(&self, factor: f64) -> Vector {
        self.iter().map(|v| v * factor).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl From<&[f64]> for Vector {
    fn from(v: &[f64]) -> Self {
        Vector(v.to_vec())
    }
}

impl FromIterator<f64> for Vector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Vector(iter.into_iter().collect())
    }
}

/// A dense real matrix stored in row-major order.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    /// Builds a matrix from row-major data, checking shape and finiteness.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidShape(format!("{rows}x{cols} matrix")));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix data",
                expected: rows * cols,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix construction"));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    context: "matrix row",
                    expected: n_cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Matrix::from_row_major(n_rows, n_cols, data)
    }

    /// Builds a matrix by evaluating `f(row, col)`. Panics on an empty shape.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix::from_fn(rows, cols, |_, _| 0.0)
    }

    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Matrix::from_fn(values.len(), values.len(), |r, c| {
            if r == c {
                values[r]
            } else {
                0.0
            }
        })
    }

    /// Single-column matrix holding `v`.
    pub fn column_vector(v: &[f64]) -> Self {
        Matrix::from_fn(v.len(), 1, |r, _| v[r])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vector {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    /// Matrix product. Panics when the inner dimensions disagree.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul inner dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            let out_row = &mut out[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Matrix {
            rows: self.rows,
            cols: other.cols,
            data: out,
        }
    }

    /// Matrix-vector product. Panics on a length mismatch.
    pub fn mat_vec(&self, v: &[f64]) -> Vector {
        assert_eq!(self.cols, v.len(), "mat_vec length mismatch");
        self.iter_rows()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Returns `self + shift * I`.
    pub fn add_diagonal(&self, shift: f64) -> Matrix {
        assert!(self.is_square(), "add_diagonal needs a square matrix");
        let mut out = self.clone();
        for i in 0..self.rows {
            out[(i, i)] += shift;
        }
        out
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.shape(), other.shape(), "matrix shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Matrix {
        Matrix::from_fn(self.rows, columns.len(), |r, c| self[(r, columns[c])])
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        Matrix::from_fn(rows.len(), self.cols, |r, c| self[(rows[r], c)])
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute asymmetry `|m[i][j] - m[j][i]|`.
    pub fn asymmetry(&self) -> f64 {
        assert!(self.is_square(), "asymmetry needs a square matrix");
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Returns `Some(n)` when `r` is within tolerance of the non-negative integer `n`.
pub(crate) fn as_nonnegative_integer(r: f64) -> Option<i32> {
    let rounded = r.round();
    if rounded >= 0.0 && (r - rounded).abs() <= INTEGER_EXPONENT_TOL && rounded <= i32::MAX as f64 {
        Some(rounded as i32)
    } else {
        None
    }
}

/// Raises every entry of `m` to the power `r`.
///
/// Integer exponents (within 1e-12) are applied with repeated multiplication
/// and accept any base. Any other exponent requires strictly positive entries.
pub fn elementwise_power(m: &Matrix, r: f64) -> Result<Matrix> {
    if !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "exponent {r} is not finite"
        )));
    }
    let data: Vec<f64> = match as_nonnegative_integer(r) {
        Some(1) => m.data.clone(),
        Some(n) => m.data.iter().map(|v| v.powi(n)).collect(),
        None => {
            if let Some(pos) = m.data.iter().position(|&v| v <= 0.0) {
                return Err(Error::NegativeBase {
                    row: pos / m.cols,
                    col: pos % m.cols,
                    value: m.data[pos],
                });
            }
            m.data.iter().map(|v| v.powf(r)).collect()
        }
    };
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("elementwise power"));
    }
    Ok(Matrix {
        rows: m.rows,
        cols: m.cols,
        data,
    })
}

/// LU factorization with partial pivoting, `P A = L U`.
///
/// Pivot rows are chosen by the largest magnitude, ties going to the lower
/// row index, so the factorization is a deterministic function of `A`.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    /// Factorizes `a`. Fails with [`Error::SingularMatrix`] when the smallest
    /// pivot magnitude is at or below `rcond` times the largest.
    pub fn factor(a: &Matrix, rcond: f64) -> Result<Lu> {
        if !a.is_square() {
            return Err(Error::InvalidShape(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows, a.cols
            )));
        }
        if !a.is_finite() {
            return Err(Error::NonFinite("LU input"));
        }
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let mut pivot_row = k;
            let mut pivot_mag = lu[k * n + k].abs();
            for r in (k + 1)..n {
                let mag = lu[r * n + k].abs();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = r;
                }
            }
            if pivot_mag == 0.0 {
                return Err(Error::SingularMatrix {
                    condition_estimate: condition_number(a),
                });
            }
            if pivot_row != k {
                for c in 0..n {
                    lu.swap(k * n + c, pivot_row * n + c);
                }
                perm.swap(k, pivot_row);
            }
            let pivot = lu[k * n + k];
            for r in (k + 1)..n {
                let factor = lu[r * n + k] / pivot;
                lu[r * n + k] = factor;
                if factor != 0.0 {
                    for c in (k + 1)..n {
                        lu[r * n + c] -= factor * lu[k * n + c];
                    }
                }
            }
        }

        let (min_pivot, max_pivot) = (0..n).fold((f64::INFINITY, 0.0_f64), |(lo, hi), i| {
            let p = lu[i * n + i].abs();
            (lo.min(p), hi.max(p))
        });
        if min_pivot <= rcond * max_pivot {
            return Err(Error::SingularMatrix {
                condition_estimate: condition_number(a),
            });
        }
        Ok(Lu { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Ratio of the smallest to the largest pivot magnitude.
    pub fn pivot_ratio(&self) -> f64 {
        let pivots = (0..self.n).map(|i| self.lu[i * self.n + i].abs());
        let (lo, hi) = pivots.fold((f64::INFINITY, 0.0_f64), |(lo, hi), p| {
            (lo.min(p), hi.max(p))
        });
        lo / hi
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vector> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                context: "linear solve right-hand side",
                expected: n,
                found: b.len(),
            });
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            x[i] -= row.iter().zip(&x[..i]).map(|(l, v)| l * v).sum::<f64>();
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let acc = x[i] - row.iter().zip(&x[i + 1..]).map(|(u, v)| u * v).sum::<f64>();
            x[i] = acc / self.lu[i * n + i];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear solve"));
        }
        Ok(Vector(x))
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &Matrix) -> Result<Matrix> {
        if b.rows != self.n {
            return Err(Error::DimensionMismatch {
                context: "linear solve right-hand side",
                expected: self.n,
                found: b.rows,
            });
        }
        let mut out = Matrix::zeros(self.n, b.cols);
        for c in 0..b.cols {
            let x = self.solve(&b.column(c))?;
            for r in 0..self.n {
                out[(r, c)] = x[r];
            }
        }
        Ok(out)
    }
}

/// Solves `a x = b` with the default singularity threshold.
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Result<Vector> {
    solve_linear_with(a, b, DEFAULT_RCOND)
}

pub fn solve_linear_with(a: &Matrix, b: &[f64], rcond: f64) -> Result<Vector> {
    if b.len() != a.rows {
        return Err(Error::DimensionMismatch {
            context: "linear solve right-hand side",
            expected: a.rows,
            found: b.len(),
        });
    }
    Lu::factor(a, rcond)?.solve(b)
}

/// Singular values in descending order.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    let mut sv: Vec<f64> = m.to_nalgebra().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// 2-norm condition number `sigma_max / sigma_min`; `+inf` when the smallest
/// singular value falls below 1e-300.
pub fn condition_number(m: &Matrix) -> f64 {
    let sv = singular_values(m);
    let max = sv.first().copied().unwrap_or(0.0);
    let min = sv.last().copied().unwrap_or(0.0);
    if !(min >= SIGMA_FLOOR) {
        return f64::INFINITY;
    }
    max / min
}

/// Numerical rank: singular values above `tol * sigma_max`.
pub fn numerical_rank(m: &Matrix, tol: f64) -> usize {
    let sv = singular_values(m);
    let max = sv.first().copied().unwrap_or(0.0);
    sv.iter().filter(|&&s| s > tol * max).count()
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    assert!(m.is_square(), "eigenvalues need a square matrix");
    let mut ev: Vec<f64> = m
        .to_nalgebra()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn power_of_perfect_squares() {
        let m = Matrix::from_rows(&[[1.0, 4.0], [9.0, 16.0]]).unwrap();
        let r = elementwise_power(&m, 0.5).unwrap();
        assert_eq!(r, Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap());
    }

    #[test]
    fn power_identity_exponent() {
        let m = Matrix::from_rows(&[[-1.5, 2.0], [0.0, 3.25]]).unwrap();
        assert_eq!(elementwise_power(&m, 1.0).unwrap(), m);
    }

    #[test]
    fn power_rejects_negative_base() {
        let m = Matrix::from_rows(&[[2.0, -3.0]]).unwrap();
        match elementwise_power(&m, 0.5) {
            Err(Error::NegativeBase { row, col, value }) => {
                assert_eq!((row, col), (0, 1));
                assert_eq!(value, -3.0);
            }
            other => panic!("expected NegativeBase, got {other:?}"),
        }
    }

    #[test]
    fn power_rejects_zero_for_fractional_exponent() {
        let m = Matrix::from_rows(&[[0.0, 1.0]]).unwrap();
        assert!(matches!(
            elementwise_power(&m, 0.3),
            Err(Error::NegativeBase { .. })
        ));
        // integers are exempt
        assert!(elementwise_power(&m, 3.0).is_ok());
    }

    #[test]
    fn power_integer_exemption_tolerance() {
        let m = Matrix::from_rows(&[[-2.0]]).unwrap();
        let r = elementwise_power(&m, 3.0 + 5e-13).unwrap();
        assert_eq!(r[(0, 0)], -8.0);
        assert!(elementwise_power(&m, 3.0 + 1e-9).is_err());
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let x = solve_linear(&Matrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0, 3.0]);
        let a = Matrix::from_rows(&[[2.0, 0.0], [0.0, 4.0]]).unwrap();
        let x = solve_linear(&a, &[2.0, 8.0]).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn solve_round_trip_random() {
        let mut rng = Rng::seed_from(11);
        // diagonally dominant, hence well conditioned
        let a = Matrix::from_fn(10, 10, |r, c| {
            let u = rng.uniform_range(-1.0, 1.0);
            if r == c {
                u + 12.0
            } else {
                u
            }
        });
        let x_true: Vector = (0..10).map(|_| rng.uniform_range(-3.0, 3.0)).collect();
        let b = a.mat_vec(&x_true);
        let x = solve_linear(&a, &b).unwrap();
        assert!(x.sub(&x_true).max_abs() < 1e-8);
        let resid = a.mat_vec(&x).sub(&b).norm2();
        assert!(resid <= 1e-8 * b.norm2());
    }

    #[test]
    fn solve_detects_singular() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert!(matches!(
            solve_linear(&a, &[1.0, 1.0]),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn solve_rejects_wrong_rhs() {
        assert!(matches!(
            solve_linear(&Matrix::identity(2), &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn condition_number_examples() {
        assert!((condition_number(&Matrix::identity(4)) - 1.0).abs() < 1e-12);
        let d = Matrix::diagonal(&[10.0, 0.1]);
        assert!((condition_number(&d) - 100.0).abs() < 1e-9);
        let rank1 = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert_eq!(condition_number(&rank1), f64::INFINITY);
    }

    #[test]
    fn construction_rejects_non_finite() {
        assert!(Matrix::from_rows(&[[1.0, f64::NAN]]).is_err());
        assert!(Matrix::from_row_major(0, 2, vec![]).is_err());
        assert!(Matrix::from_row_major(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn matmul_matches_hand_product() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(
            a.matmul(&b),
            Matrix::from_rows(&[[2.0, 1.0], [4.0, 3.0]]).unwrap()
        );
    }
}
