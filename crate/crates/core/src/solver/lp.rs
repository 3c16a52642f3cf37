use serde::{Deserialize, Serialize};

use super::simplex::{Outcome, Tableau};
use super::{BasisSnapshot, FarkasCertificate, LinearProgram, ParametricMilp, SolverError};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution<S: Scalar> {
    pub status: LpStatus,
    pub x: Vec<S>,
    /// `c'x + d'y` at the solution.
    pub objective: S,
    /// One multiplier per row of `Ax ≤ b + Fθ − Ey`.
    pub duals: Vec<S>,
    pub reduced_costs: Vec<S>,
    /// Sorted basic column indices (structural columns first, then row slacks).
    pub basis: Vec<usize>,
    /// Optimal basis as an affine map of the effective right-hand side.
    pub snapshot: Option<BasisSnapshot<S>>,
    /// Present when infeasible.
    pub certificate: Option<FarkasCertificate<S>>,
}

impl<S: Scalar> LpSolution<S> {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn empty(status: LpStatus, p: usize, m: usize) -> Self {
        Self {
            status,
            x: vec![S::zero(); p],
            objective: S::neg_infinity(),
            duals: vec![S::zero(); m],
            reduced_costs: vec![S::zero(); p],
            basis: Vec::new(),
            snapshot: None,
            certificate: None,
        }
    }
}

/// Solves a general bounded LP, returning what the parametric wrappers need.
pub(crate) fn solve_program<S: Scalar>(
    lp: &LinearProgram<S>,
) -> Result<LpSolution<S>, SolverError> {
    let mut tab = Tableau::new(lp);
    let out = tab.solve()?;
    let (p, m) = (lp.cols(), lp.rows());
    Ok(match out {
        Outcome::Optimal => {
            let mut basis = tab.basis_cols();
            let snapshot = tab.snapshot(&lp.rhs);
            basis.sort_unstable();
            LpSolution {
                status: LpStatus::Optimal,
                x: tab.structural(),
                objective: tab.objective_value(),
                duals: tab.duals(),
                reduced_costs: tab.reduced_costs(),
                basis,
                snapshot: Some(snapshot),
                certificate: None,
            }
        }
        Outcome::Infeasible(cert) => {
            let mut s = LpSolution::empty(LpStatus::Infeasible, p, m);
            s.certificate = cert;
            s
        }
        Outcome::Unbounded => {
            let mut s = LpSolution::empty(LpStatus::Unbounded, p, m);
            s.objective = S::infinity();
            s
        }
    })
}

/// LP in `x` at parameter `θ` with the binaries fixed to `fixed_y`
/// (all zeros when `None`).
pub fn solve_lp<S: Scalar>(
    model: &ParametricMilp<S>,
    theta: &[S],
    fixed_y: Option<&[S]>,
) -> Result<LpSolution<S>, SolverError> {
    model.validate()?;
    if theta.len() != model.theta_dim() {
        return Err(SolverError::Dimension(format!(
            "θ has length {}, model expects {}",
            theta.len(),
            model.theta_dim()
        )));
    }
    let zeros = vec![S::zero(); model.q()];
    let y = match fixed_y {
        Some(y) if y.len() != model.q() => {
            return Err(SolverError::Dimension(format!(
                "fixed binary vector has length {}, model has {}",
                y.len(),
                model.q()
            )))
        }
        Some(y) => y,
        None => &zeros,
    };
    let rhs = model.rhs_at(theta, Some(y));
    let lp = LinearProgram {
        objective: model.c.clone(),
        matrix: model.a.clone(),
        sense: model.sense.clone(),
        rhs,
        lower: vec![S::zero(); model.p()],
        upper: vec![S::infinity(); model.p()],
    };
    let mut sol = solve_program(&lp)?;
    if sol.is_optimal() {
        sol.objective = sol.objective + crate::linalg::dot(&model.d, y);
    }
    Ok(sol)
}
