//! H-polytopes `{θ | e'θ + f ≤ 0}`: Chebyshev centers, redundancy removal,
//! linear maximization.

use serde::{Deserialize, Serialize};

use super::lp::solve_program;
use super::{LinearProgram, LpStatus, RowSense, SolverError};
use crate::linalg::{dot, norm2};
use crate::scalar::Scalar;

/// `e'θ + f ≤ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Halfspace<S: Scalar> {
    pub e: Vec<S>,
    pub f: S,
}

impl<S: Scalar> Halfspace<S> {
    pub fn new(e: Vec<S>, f: S) -> Self {
        Self { e, f }
    }

    /// `θ_k ≥ lo`.
    pub fn lower(dim: usize, k: usize, lo: S) -> Self {
        let mut e = vec![S::zero(); dim];
        e[k] = -S::one();
        Self { e, f: lo }
    }

    /// `θ_k ≤ hi`.
    pub fn upper(dim: usize, k: usize, hi: S) -> Self {
        let mut e = vec![S::zero(); dim];
        e[k] = S::one();
        Self { e, f: -hi }
    }

    pub fn eval(&self, theta: &[S]) -> S {
        dot(&self.e, theta) + self.f
    }

    /// Unit-normal form; `None` when the normal vanishes.
    pub fn normalized(&self) -> Option<Self> {
        let n = norm2(&self.e);
        if n <= S::lit(1e-13) {
            return None;
        }
        Some(Self {
            e: self.e.iter().map(|&v| v / n).collect(),
            f: self.f / n,
        })
    }

    pub fn flipped(&self) -> Self {
        Self {
            e: self.e.iter().map(|&v| -v).collect(),
            f: -self.f,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Polytope<S: Scalar> {
    pub dim: usize,
    pub ineqs: Vec<Halfspace<S>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CenterResult<S: Scalar> {
    Center { point: Vec<S>, radius: S },
    Empty,
    Unbounded,
}

impl<S: Scalar> Polytope<S> {
    pub fn new(dim: usize, ineqs: Vec<Halfspace<S>>) -> Self {
        Self { dim, ineqs }
    }

    pub fn boxed(lo: &[S], hi: &[S]) -> Self {
        let dim = lo.len();
        let mut ineqs = Vec::with_capacity(2 * dim);
        for k in 0..dim {
            ineqs.push(Halfspace::lower(dim, k, lo[k]));
            ineqs.push(Halfspace::upper(dim, k, hi[k]));
        }
        Self { dim, ineqs }
    }

    /// Adds a cut; cuts with a vanishing normal are dropped when trivially
    /// satisfied and otherwise make the set empty (a `0 ≤ −1` row is kept).
    pub fn with(&self, h: Halfspace<S>) -> Self {
        let mut out = self.clone();
        out.push(h);
        out
    }

    pub fn push(&mut self, h: Halfspace<S>) {
        match h.normalized() {
            Some(n) => self.ineqs.push(n),
            None if h.f <= S::lit(1e-12) => {}
            None => self
                .ineqs
                .push(Halfspace::new(vec![S::zero(); self.dim], S::one())),
        }
    }

    pub fn contains(&self, theta: &[S], tol: S) -> bool {
        self.ineqs.iter().all(|h| h.eval(theta) <= tol)
    }

    /// Largest left-hand-side value over the rows (≤ 0 inside).
    pub fn max_violation(&self, theta: &[S]) -> S {
        self.ineqs
            .iter()
            .map(|h| h.eval(theta))
            .fold(S::neg_infinity(), S::max)
    }

    pub fn chebyshev(&self) -> Result<CenterResult<S>, SolverError> {
        chebyshev_center(&self.ineqs, self.dim)
    }

    pub fn reduced(&self) -> Result<Self, SolverError> {
        Ok(Self {
            dim: self.dim,
            ineqs: remove_redundant(&self.ineqs, self.dim)?,
        })
    }

    /// `max e'θ` over the polytope; `None` when empty, `+∞` when unbounded.
    pub fn maximize(&self, e: &[S]) -> Result<Option<(S, Vec<S>)>, SolverError> {
        let mut lp = free_program(self.dim, &self.ineqs, None);
        lp.objective = e.to_vec();
        let s = solve_program(&lp)?;
        Ok(match s.status {
            LpStatus::Optimal => Some((s.objective, s.x)),
            LpStatus::Unbounded => Some((S::infinity(), Vec::new())),
            LpStatus::Infeasible => None,
        })
    }
}

fn free_program<S: Scalar>(
    dim: usize,
    ineqs: &[Halfspace<S>],
    skip: Option<usize>,
) -> LinearProgram<S> {
    let mut lp = LinearProgram::new(dim);
    lp.lower = vec![S::neg_infinity(); dim];
    for (i, h) in ineqs.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        lp.add_row(&h.e, RowSense::Le, -h.f);
    }
    lp
}

/// Center and radius of the largest ball inside `{θ | e'θ + f ≤ 0}`.
pub fn chebyshev_center<S: Scalar>(
    ineqs: &[Halfspace<S>],
    dim: usize,
) -> Result<CenterResult<S>, SolverError> {
    let mut lp = LinearProgram::new(dim + 1);
    lp.lower = vec![S::neg_infinity(); dim + 1];
    lp.lower[dim] = S::zero();
    lp.objective[dim] = S::one();
    let mut row = vec![S::zero(); dim + 1];
    for h in ineqs {
        if h.e.len() != dim {
            return Err(SolverError::Dimension(
                "inequality length differs from dimension".into(),
            ));
        }
        row[..dim].copy_from_slice(&h.e);
        row[dim] = norm2(&h.e);
        lp.add_row(&row, RowSense::Le, -h.f);
    }
    let s = solve_program(&lp)?;
    Ok(match s.status {
        LpStatus::Optimal => CenterResult::Center {
            point: s.x[..dim].to_vec(),
            radius: s.x[dim].max(S::zero()),
        },
        LpStatus::Infeasible => CenterResult::Empty,
        LpStatus::Unbounded => CenterResult::Unbounded,
    })
}

/// Drops every row implied by the remaining ones (tested in order, so of two
/// duplicates the later copy survives).
pub fn remove_redundant<S: Scalar>(
    ineqs: &[Halfspace<S>],
    dim: usize,
) -> Result<Vec<Halfspace<S>>, SolverError> {
    let tol = S::lit(1e-9);
    let mut keep = vec![true; ineqs.len()];
    for i in 0..ineqs.len() {
        let kept: Vec<Halfspace<S>> = ineqs
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i && keep[k])
            .map(|(_, h)| h.clone())
            .collect();
        let h = &ineqs[i];
        let mut lp = free_program(dim, &kept, None);
        // cap the tested row so the LP stays bounded
        lp.add_row(&h.e, RowSense::Le, S::one() - h.f);
        lp.objective = h.e.clone();
        let s = solve_program(&lp)?;
        match s.status {
            LpStatus::Optimal if s.objective + h.f <= tol => keep[i] = false,
            LpStatus::Infeasible => {
                // the other rows are empty on their own; keep row i only if needed
                keep[i] = false;
            }
            _ => {}
        }
    }
    Ok(ineqs
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(h, _)| h.clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Polytope<f64> {
        Polytope::boxed(&[0.0, 0.0], &[1.0, 1.0])
    }

    #[test]
    fn square_center() {
        match square().chebyshev().unwrap() {
            CenterResult::Center { point, radius } => {
                assert!((point[0] - 0.5).abs() < 1e-9 && (point[1] - 0.5).abs() < 1e-9);
                assert!((radius - 0.5).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn triangle_incircle() {
        let t = Polytope::new(
            2,
            vec![
                Halfspace::lower(2, 0, 0.0),
                Halfspace::lower(2, 1, 0.0),
                Halfspace::new(vec![1.0, 1.0], -1.0),
            ],
        );
        match t.chebyshev().unwrap() {
            CenterResult::Center { radius, .. } => {
                assert!((radius - (2.0 - 2f64.sqrt()) / 2.0).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_interval() {
        let p = Polytope::new(
            1,
            vec![Halfspace::upper(1, 0, 0.0), Halfspace::lower(1, 0, 1.0)],
        );
        assert_eq!(p.chebyshev().unwrap(), CenterResult::Empty);
    }

    #[test]
    fn redundant_bound_dropped() {
        let rows = vec![Halfspace::upper(1, 0, 1.0), Halfspace::upper(1, 0, 2.0)];
        let r = remove_redundant(&rows, 1).unwrap();
        assert_eq!(r, vec![Halfspace::upper(1, 0, 1.0)]);
    }

    #[test]
    fn duplicate_face_dropped() {
        let mut p = square();
        p.ineqs.push(Halfspace::upper(2, 0, 1.0));
        let r = p.reduced().unwrap();
        assert_eq!(r.ineqs.len(), 4);
    }
}
