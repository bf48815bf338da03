//! Stretchy regression: closed-form estimators that minimize a smooth
//! k-measure of the coefficients subject to fitting the data, with the
//! surrounding transforms, variance analysis, evaluation and I/O.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod linalg;
pub mod measure;
pub mod rng;
pub mod solver;
pub mod transform;
pub mod variance;

pub use data::{Dataset, SynthKind, SynthSpec, Task};
pub use error::{Error, Result};
pub use estimator::{FittedModel, ModelSpec};
pub use evaluation::{CvPlan, Metrics, RankTable};
pub use linalg::{Matrix, Vector};
pub use rng::Rng;
pub use solver::{FittedCoefficients, Regularization, SolverForm, StretchConfig};
pub use transform::{BasisKind, BasisSpec, DesignMatrix, TransformParams};
pub use variance::{NoiseModel, Regime};
