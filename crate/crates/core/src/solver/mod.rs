//! LP/MILP solving on the compact parametric model, plus polytope utilities.

mod branch;
pub mod dump;
mod lp;
mod milp;
mod model;
pub mod polytope;
mod simplex;

use thiserror::Error;

pub use branch::{solve_mip, MipOptions, MipResult, MipStatus};
pub use lp::{solve_lp, LpSolution, LpStatus};
pub use milp::{brute_force_milp, solve_milp, CutRow, MilpSolution, MilpStatus, BRUTE_FORCE_LIMIT};
pub use model::{LinExpr, ModelBuilder, ParametricMilp, VarId, VarKind};
pub use polytope::{chebyshev_center, remove_redundant, CenterResult, Halfspace, Polytope};
pub use simplex::{BasisSnapshot, FarkasCertificate, LinearProgram, RowSense};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("simplex iteration limit reached after {0} pivots")]
    IterationLimit(usize),
    #[error("branch-and-bound depth cap {0} exceeded")]
    DepthCap(usize),
    #[error("branch-and-bound node limit {0} exceeded")]
    NodeLimit(usize),
    #[error("too many binaries for enumeration: {0} > {1}")]
    TooManyBinaries(usize, usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
}
