//! Shared fixtures for the benchmarks.

use stretchy_core::{Matrix, Rng};

/// Positive `rows x cols` design with entries in `[0.1, 1)`.
pub fn positive_design(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = Rng::seed_from(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.uniform_range(0.1, 1.0))
}

pub fn targets(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = Rng::for_stream(seed, 1);
    (0..n).map(|_| rng.standard_normal()).collect()
}

/// Two standard-normal features.
pub fn planar_points(n: usize, seed: u64) -> Matrix {
    let mut rng = Rng::seed_from(seed);
    Matrix::from_fn(n, 2, |_, _| rng.standard_normal())
}
