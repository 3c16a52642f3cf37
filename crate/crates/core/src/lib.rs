//! Future value of carryover storage in cascaded hydropower systems.
//!
//! The numerical kernels (simplex, branch-and-bound, polytopes, Gaussian
//! mixtures, parametric partitioning) are generic over [`Scalar`]; the
//! hydropower builders and the planner work in `f64`.

pub mod error;
pub mod forecast;
pub mod future;
pub mod linalg;
pub mod mp;
pub mod planner;
pub mod scalar;
pub mod sim;
pub mod solver;
pub mod system;
pub mod units;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Milp = solver::ParametricMilp<f64>;
pub type Lp = solver::LinearProgram<f64>;
