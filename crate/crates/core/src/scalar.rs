//! Floating-point abstraction shared by the solver, polytope and forecast math.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar type used by the numerical kernels.
///
/// Tolerances are per type so that `f32` instances stay solvable with looser
/// thresholds while `f64` uses the documented defaults.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumCast
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Primal feasibility tolerance on row-scaled data.
    fn feas_tol() -> Self;
    /// Reduced-cost (dual feasibility) tolerance.
    fn opt_tol() -> Self;
    /// Smallest admissible pivot magnitude.
    fn pivot_tol() -> Self;
    /// Distance from {0,1} accepted as integral.
    fn int_tol() -> Self;
    /// Absolute optimality gap of branch-and-bound.
    fn gap_tol() -> Self;
    /// Standard normal cumulative distribution function.
    fn norm_cdf(self) -> Self;
    /// Standard normal density.
    fn norm_pdf(self) -> Self;

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal fits scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl Scalar for f64 {
    fn feas_tol() -> Self {
        1e-9
    }
    fn opt_tol() -> Self {
        1e-9
    }
    fn pivot_tol() -> Self {
        1e-9
    }
    fn int_tol() -> Self {
        1e-6
    }
    fn gap_tol() -> Self {
        1e-8
    }
    fn norm_cdf(self) -> Self {
        std_normal_cdf(self)
    }
    fn norm_pdf(self) -> Self {
        std_normal_pdf(self)
    }
}

impl Scalar for f32 {
    fn feas_tol() -> Self {
        1e-5
    }
    fn opt_tol() -> Self {
        1e-5
    }
    fn pivot_tol() -> Self {
        1e-6
    }
    fn int_tol() -> Self {
        1e-4
    }
    fn gap_tol() -> Self {
        1e-4
    }
    fn norm_cdf(self) -> Self {
        std_normal_cdf(self as f64) as f32
    }
    fn norm_pdf(self) -> Self {
        std_normal_pdf(self as f64) as f32
    }
}
