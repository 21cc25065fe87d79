//! Penalized regression spline machinery shared by the deconvolution and
//! demography models: bases, penalties, penalized Newton fitting, the Laplace
//! marginal likelihood and the smoothing parameter iteration.

mod basis;
mod constraint;
mod fit;
pub mod linalg;
mod models;

pub use basis::{BasisKind, Penalty, SplineBasis};
pub use constraint::{SmoothTerm, SumToZero};
pub use fit::{
    fit_fixed, fit_penalized, laplace_log_marginal, penalized_newton, total_penalty,
    update_lambdas, FitOptions, LambdaUpdate, LikelihoodEval, LogLikelihood, NewtonOptions,
    NewtonResult, PenalizedFit, PenaltyBlock, LAMBDA_MAX, LAMBDA_MIN,
};
pub use models::{FnLikelihood, GaussianLinear, PoissonLog};

use crate::error::Result;

/// Build an evenly spaced basis over `range`.
pub fn build_basis(kind: BasisKind, range: (f64, f64), dim: usize) -> Result<SplineBasis> {
    SplineBasis::new(kind, range, dim)
}
