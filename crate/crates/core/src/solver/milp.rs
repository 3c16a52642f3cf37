use serde::{Deserialize, Serialize};

use super::branch::{solve_mip, MipOptions, MipStatus};
use super::{solve_lp, LinearProgram, LpSolution, LpStatus, ParametricMilp, RowSense, SolverError};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const BRUTE_FORCE_LIMIT: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Extra row `x_coeffs·x + y_coeffs·y ≤ rhs`.
#[derive(Clone, Debug)]
pub struct CutRow<S: Scalar> {
    pub x_coeffs: Vec<S>,
    pub y_coeffs: Vec<S>,
    pub rhs: S,
}

#[derive(Clone, Debug)]
pub struct MilpSolution<S: Scalar> {
    pub status: MilpStatus,
    pub x: Vec<S>,
    pub y: Vec<S>,
    pub objective: S,
    pub nodes: usize,
    /// LP at the optimal binaries (duals of the fixed-y problem).
    pub lp: Option<LpSolution<S>>,
}

impl<S: Scalar> MilpSolution<S> {
    pub fn is_optimal(&self) -> bool {
        self.status == MilpStatus::Optimal
    }

    fn without(status: MilpStatus, p: usize, q: usize, nodes: usize) -> Self {
        Self {
            status,
            x: vec![S::zero(); p],
            y: vec![S::zero(); q],
            objective: if status == MilpStatus::Unbounded {
                S::infinity()
            } else {
                S::neg_infinity()
            },
            nodes,
            lp: None,
        }
    }
}

fn check_theta<S: Scalar>(model: &ParametricMilp<S>, theta: &[S]) -> Result<(), SolverError> {
    model.validate()?;
    if theta.len() != model.theta_dim() {
        return Err(SolverError::Dimension(format!(
            "θ has length {}, model expects {}",
            theta.len(),
            model.theta_dim()
        )));
    }
    Ok(())
}

/// Global MILP optimum at fixed `θ`, optionally with extra cut rows.
pub fn solve_milp<S: Scalar>(
    model: &ParametricMilp<S>,
    theta: &[S],
    extra_rows: &[CutRow<S>],
) -> Result<MilpSolution<S>, SolverError> {
    check_theta(model, theta)?;
    let (p, q) = (model.p(), model.q());
    let mut lp = LinearProgram::new(p + q);
    lp.objective[..p].copy_from_slice(&model.c);
    lp.objective[p..].copy_from_slice(&model.d);
    for j in p..p + q {
        lp.upper[j] = S::one();
    }
    let rhs = model.rhs_at(theta, None);
    let mut mat = Matrix::zeros(0, p + q);
    let mut row = vec![S::zero(); p + q];
    for i in 0..model.rows() {
        row[..p].copy_from_slice(model.a.row(i));
        row[p..].copy_from_slice(model.e.row(i));
        mat.push_row(&row);
    }
    lp.matrix = mat;
    lp.sense = model.sense.clone();
    lp.rhs = rhs;
    for cut in extra_rows {
        if cut.x_coeffs.len() != p || cut.y_coeffs.len() != q {
            return Err(SolverError::Dimension("cut row length mismatch".into()));
        }
        row[..p].copy_from_slice(&cut.x_coeffs);
        row[p..].copy_from_slice(&cut.y_coeffs);
        lp.add_row(&row, RowSense::Le, cut.rhs);
    }
    let integer: Vec<usize> = (p..p + q).collect();
    let res = solve_mip(&lp, &integer, &MipOptions::default())?;
    match res.status {
        MipStatus::Infeasible => {
            return Ok(MilpSolution::without(
                MilpStatus::Infeasible,
                p,
                q,
                res.nodes,
            ))
        }
        MipStatus::Unbounded => {
            return Ok(MilpSolution::without(
                MilpStatus::Unbounded,
                p,
                q,
                res.nodes,
            ))
        }
        MipStatus::Optimal => {}
    }
    let y: Vec<S> = res.x[p..].iter().map(|v| v.round()).collect();
    if extra_rows.is_empty() {
        // re-solve at the rounded binaries for clean values and duals
        let fixed = solve_lp(model, theta, Some(&y))?;
        if fixed.status == LpStatus::Optimal {
            return Ok(MilpSolution {
                status: MilpStatus::Optimal,
                x: fixed.x.clone(),
                y,
                objective: fixed.objective,
                nodes: res.nodes,
                lp: Some(fixed),
            });
        }
    }
    Ok(MilpSolution {
        status: MilpStatus::Optimal,
        x: res.x[..p].to_vec(),
        y,
        objective: res.objective,
        nodes: res.nodes,
        lp: None,
    })
}

/// Exhaustive reference: one LP per binary assignment.
pub fn brute_force_milp<S: Scalar>(
    model: &ParametricMilp<S>,
    theta: &[S],
) -> Result<MilpSolution<S>, SolverError> {
    check_theta(model, theta)?;
    let (p, q) = (model.p(), model.q());
    if q > BRUTE_FORCE_LIMIT {
        return Err(SolverError::TooManyBinaries(q, BRUTE_FORCE_LIMIT));
    }
    let mut best: Option<MilpSolution<S>> = None;
    let mut unbounded = false;
    for mask in 0u64..(1u64 << q) {
        let y: Vec<S> = (0..q)
            .map(|k| {
                if mask >> k & 1 == 1 {
                    S::one()
                } else {
                    S::zero()
                }
            })
            .collect();
        let sol = solve_lp(model, theta, Some(&y))?;
        match sol.status {
            LpStatus::Optimal => {
                if best.as_ref().map_or(true, |b| sol.objective > b.objective) {
                    best = Some(MilpSolution {
                        status: MilpStatus::Optimal,
                        x: sol.x.clone(),
                        y,
                        objective: sol.objective,
                        nodes: 0,
                        lp: Some(sol),
                    });
                }
            }
            LpStatus::Unbounded => unbounded = true,
            LpStatus::Infeasible => {}
        }
    }
    let count = 1usize << q;
    if unbounded {
        return Ok(MilpSolution::without(MilpStatus::Unbounded, p, q, count));
    }
    Ok(match best {
        Some(mut b) => {
            b.nodes = count;
            b
        }
        None => MilpSolution::without(MilpStatus::Infeasible, p, q, count),
    })
}
