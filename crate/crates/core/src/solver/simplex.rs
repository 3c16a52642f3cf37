//! Bounded-variable dense tableau simplex with a primal and a dual driver.
//!
//! Rows are `a·x ≤ b` or `a·x = b`; every column carries `[lower, upper]`
//! bounds (either side may be infinite). Rows are equilibrated internally,
//! duals and certificates are reported in the caller's row units.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::SolverError;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Eq,
}

/// `maximize objective·x` over `matrix·x (≤|=) rhs`, `lower ≤ x ≤ upper`.
#[derive(Clone, Debug)]
pub struct LinearProgram<S: Scalar> {
    pub objective: Vec<S>,
    pub matrix: Matrix<S>,
    pub sense: Vec<RowSense>,
    pub rhs: Vec<S>,
    pub lower: Vec<S>,
    pub upper: Vec<S>,
}

impl<S: Scalar> LinearProgram<S> {
    /// Empty program over `n` nonnegative columns.
    pub fn new(n: usize) -> Self {
        Self {
            objective: vec![S::zero(); n],
            matrix: Matrix::zeros(0, n),
            sense: Vec::new(),
            rhs: Vec::new(),
            lower: vec![S::zero(); n],
            upper: vec![S::infinity(); n],
        }
    }

    pub fn cols(&self) -> usize {
        self.objective.len()
    }

    pub fn rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn add_row(&mut self, coeffs: &[S], sense: RowSense, rhs: S) {
        self.matrix.push_row(coeffs);
        self.sense.push(sense);
        self.rhs.push(rhs);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum VarState {
    Basic,
    AtLower,
    AtUpper,
    Free,
}

/// Proof of infeasibility that stays valid when only the right-hand side moves:
/// any `rhs'` with `weights·rhs' + offset < 0` is infeasible.
#[derive(Clone, Debug)]
pub struct FarkasCertificate<S: Scalar> {
    pub weights: Vec<S>,
    pub offset: S,
}

/// Optimal basis expressed as an affine map of the right-hand side:
/// basic value `i` equals `binv.row(i)·rhs + shift[i]` and must stay in
/// `[lower[i], upper[i]]` for the basis to remain optimal.
#[derive(Clone, Debug)]
pub struct BasisSnapshot<S: Scalar> {
    pub cols: Vec<usize>,
    pub binv: Matrix<S>,
    pub shift: Vec<S>,
    pub lower: Vec<S>,
    pub upper: Vec<S>,
}

#[derive(Clone, Debug)]
pub(crate) enum Outcome<S: Scalar> {
    Optimal,
    Infeasible(Option<FarkasCertificate<S>>),
    Unbounded,
}

const BLAND_AFTER: usize = 500;

#[derive(Clone, Debug)]
pub(crate) struct Tableau<S: Scalar> {
    m: usize,
    n: usize,
    ncols: usize,
    a: Arc<Matrix<S>>,
    b: Arc<Vec<S>>,
    scale: Arc<Vec<S>>,
    t: Matrix<S>,
    beta: Vec<S>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    lo: Vec<S>,
    hi: Vec<S>,
    objective: Vec<S>,
    d: Vec<S>,
    art_start: usize,
    pub iterations: usize,
    limit: usize,
}

impl<S: Scalar> Tableau<S> {
    /// Builds the slack/artificial starting basis.
    pub(crate) fn new(lp: &LinearProgram<S>) -> Self {
        let m = lp.rows();
        let n = lp.cols();
        let mut scale = vec![S::one(); m];
        for (i, s) in scale.iter_mut().enumerate() {
            let mx = lp
                .matrix
                .row(i)
                .iter()
                .fold(S::zero(), |acc, v| acc.max(v.abs()));
            if mx > S::zero() {
                *s = S::one() / mx;
            }
        }
        let mut state = Vec::with_capacity(n + 2 * m);
        let mut xval = vec![S::zero(); n];
        for j in 0..n {
            let (l, u) = (lp.lower[j], lp.upper[j]);
            if l.is_finite() {
                state.push(VarState::AtLower);
                xval[j] = l;
            } else if u.is_finite() {
                state.push(VarState::AtUpper);
                xval[j] = u;
            } else {
                state.push(VarState::Free);
            }
        }
        let mut resid = vec![S::zero(); m];
        let mut art_rows = Vec::new();
        for i in 0..m {
            let row = lp.matrix.row(i);
            let ax = row
                .iter()
                .zip(&xval)
                .fold(S::zero(), |acc, (&a, &x)| acc + a * x);
            let r = (lp.rhs[i] - ax) * scale[i];
            resid[i] = r;
            let tol = S::feas_tol() * (S::one() + (lp.rhs[i] * scale[i]).abs());
            let bad = match lp.sense[i] {
                RowSense::Le => r < -tol,
                RowSense::Eq => r.abs() > tol,
            };
            if bad {
                art_rows.push(i);
            }
        }
        let art_start = n + m;
        let ncols = art_start + art_rows.len();
        let mut a = Matrix::zeros(m, ncols);
        for i in 0..m {
            let s = scale[i];
            let src = lp.matrix.row(i);
            let dst = a.row_mut(i);
            for j in 0..n {
                dst[j] = src[j] * s;
            }
            dst[n + i] = S::one();
        }
        let mut lo = Vec::with_capacity(ncols);
        let mut hi = Vec::with_capacity(ncols);
        lo.extend_from_slice(&lp.lower);
        hi.extend_from_slice(&lp.upper);
        for i in 0..m {
            lo.push(S::zero());
            hi.push(match lp.sense[i] {
                RowSense::Le => S::infinity(),
                RowSense::Eq => S::zero(),
            });
            state.push(VarState::Basic);
        }
        let mut basis: Vec<usize> = (n..n + m).collect();
        let mut beta = resid.clone();
        let mut t = a.clone();
        for (k, &i) in art_rows.iter().enumerate() {
            let col = art_start + k;
            let sigma = if resid[i] < S::zero() {
                -S::one()
            } else {
                S::one()
            };
            a[(i, col)] = sigma;
            t[(i, col)] = sigma;
            if sigma < S::zero() {
                for v in t.row_mut(i) {
                    *v = -*v;
                }
            }
            lo.push(S::zero());
            hi.push(S::infinity());
            state[n + i] = VarState::AtLower;
            state.push(VarState::Basic);
            basis[i] = col;
            beta[i] = resid[i].abs();
        }
        let mut objective = lp.objective.clone();
        objective.resize(ncols, S::zero());
        let b: Vec<S> = (0..m).map(|i| lp.rhs[i] * scale[i]).collect();
        let limit = 20_000 + 50 * (m + ncols);
        Self {
            m,
            n,
            ncols,
            a: Arc::new(a),
            b: Arc::new(b),
            scale: Arc::new(scale),
            t,
            beta,
            basis,
            state,
            lo,
            hi,
            objective,
            d: vec![S::zero(); ncols],
            art_start,
            iterations: 0,
            limit,
        }
    }

    fn value_of(&self, j: usize) -> S {
        match self.state[j] {
            VarState::AtLower => self.lo[j],
            VarState::AtUpper => self.hi[j],
            VarState::Free => S::zero(),
            VarState::Basic => {
                let r = self
                    .basis
                    .iter()
                    .position(|&c| c == j)
                    .expect("basic column");
                self.beta[r]
            }
        }
    }

    fn nonbasic_value(&self, j: usize) -> S {
        match self.state[j] {
            VarState::AtLower => self.lo[j],
            VarState::AtUpper => self.hi[j],
            _ => S::zero(),
        }
    }

    fn set_costs(&mut self, cost: &[S]) {
        for j in 0..self.ncols {
            let mut v = cost[j];
            for i in 0..self.m {
                let cb = cost[self.basis[i]];
                if cb != S::zero() {
                    v = v - cb * self.t[(i, j)];
                }
            }
            self.d[j] = v;
        }
        for &j in &self.basis {
            self.d[j] = S::zero();
        }
    }

    /// Full two-phase solve from the starting basis.
    pub(crate) fn solve(&mut self) -> Result<Outcome<S>, SolverError> {
        if self.ncols > self.art_start {
            let mut cost = vec![S::zero(); self.ncols];
            for c in cost.iter_mut().skip(self.art_start) {
                *c = -S::one();
            }
            self.set_costs(&cost);
            match self.primal()? {
                Outcome::Optimal => {}
                Outcome::Unbounded => {
                    return Err(SolverError::Numerical("phase one unbounded".into()))
                }
                Outcome::Infeasible(_) => unreachable!(),
            }
            let infeas: S = (0..self.m)
                .filter(|&i| self.basis[i] >= self.art_start)
                .map(|i| self.beta[i].max(S::zero()))
                .fold(S::zero(), |a, v| a + v);
            let bscale = self.b.iter().fold(S::zero(), |a, v| a.max(v.abs()));
            if infeas > S::feas_tol() * (S::one() + bscale) * S::lit(10.0) {
                return Ok(Outcome::Infeasible(Some(self.certificate())));
            }
            for j in self.art_start..self.ncols {
                self.hi[j] = S::zero();
                if self.state[j] != VarState::Basic {
                    self.state[j] = VarState::AtLower;
                }
            }
            self.drive_out_artificials();
        }
        let obj = self.objective.clone();
        self.set_costs(&obj);
        let out = self.primal()?;
        if let Outcome::Optimal = out {
            self.polish()?;
        }
        Ok(out)
    }

    fn certificate(&self) -> FarkasCertificate<S> {
        let weights = (0..self.m)
            .map(|i| -self.d[self.n + i] * self.scale[i])
            .collect();
        let mut offset = S::zero();
        for j in 0..self.ncols {
            if self.state[j] != VarState::Basic {
                let v = self.nonbasic_value(j);
                if v != S::zero() {
                    offset = offset + self.d[j] * v;
                }
            }
        }
        FarkasCertificate { weights, offset }
    }

    fn drive_out_artificials(&mut self) {
        for r in 0..self.m {
            if self.basis[r] < self.art_start {
                continue;
            }
            let mut best = None;
            let mut best_abs = S::lit(1e-7);
            for j in 0..self.art_start {
                if self.state[j] == VarState::Basic {
                    continue;
                }
                let v = self.t[(r, j)].abs();
                if v > best_abs {
                    best_abs = v;
                    best = Some(j);
                }
            }
            if let Some(q) = best {
                let delta = (self.beta[r] - self.lo[self.basis[r]]) / self.t[(r, q)];
                self.shift_basics(q, delta);
                let newv = self.nonbasic_value(q) + delta;
                let leaving = self.basis[r];
                self.state[leaving] = VarState::AtLower;
                self.pivot(r, q);
                self.beta[r] = newv;
                self.state[q] = VarState::Basic;
            }
        }
    }

    fn shift_basics(&mut self, q: usize, delta: S) {
        if delta == S::zero() {
            return;
        }
        for i in 0..self.m {
            let tq = self.t[(i, q)];
            if tq != S::zero() {
                self.beta[i] = self.beta[i] - tq * delta;
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let p = self.t[(r, q)];
        let inv = S::one() / p;
        for v in self.t.row_mut(r) {
            *v = *v * inv;
        }
        self.t[(r, q)] = S::one();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[(i, q)];
            if f != S::zero() {
                self.t.axpy_rows(i, r, f);
                self.t[(i, q)] = S::zero();
            }
        }
        let dq = self.d[q];
        if dq != S::zero() {
            let row = self.t.row(r);
            for (dj, &tr) in self.d.iter_mut().zip(row) {
                if tr != S::zero() {
                    *dj = *dj - dq * tr;
                }
            }
        }
        self.d[q] = S::zero();
        self.basis[r] = q;
        self.iterations += 1;
    }

    fn entering_direction(&self, j: usize) -> Option<S> {
        let tol = S::opt_tol();
        let dj = self.d[j];
        match self.state[j] {
            VarState::Basic => None,
            VarState::AtLower if dj > tol && self.hi[j] > self.lo[j] => Some(S::one()),
            VarState::AtUpper if dj < -tol && self.hi[j] > self.lo[j] => Some(-S::one()),
            VarState::Free if dj > tol => Some(S::one()),
            VarState::Free if dj < -tol => Some(-S::one()),
            _ => None,
        }
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, S)> {
        let mut best: Option<(usize, S)> = None;
        let mut best_score = S::zero();
        for j in 0..self.ncols {
            let Some(dir) = self.entering_direction(j) else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            let mut norm = S::one();
            for i in 0..self.m {
                let v = self.t[(i, j)];
                norm = norm + v * v;
            }
            let score = self.d[j] * self.d[j] / norm;
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    /// Primal simplex from a primal-feasible basis under the current costs.
    pub(crate) fn primal(&mut self) -> Result<Outcome<S>, SolverError> {
        let start = self.iterations;
        let ptol = S::pivot_tol();
        loop {
            if self.iterations > self.limit {
                return Err(SolverError::IterationLimit(self.iterations));
            }
            let bland = self.iterations - start >= BLAND_AFTER;
            let Some((q, dir)) = self.choose_entering(bland) else {
                return Ok(Outcome::Optimal);
            };
            let mut step = if self.lo[q].is_finite() && self.hi[q].is_finite() {
                self.hi[q] - self.lo[q]
            } else {
                S::infinity()
            };
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_alpha = S::zero();
            for i in 0..self.m {
                let alpha = self.t[(i, q)] * dir;
                let bi = self.basis[i];
                let (cand, to_lower) = if alpha > ptol {
                    if !self.lo[bi].is_finite() {
                        continue;
                    }
                    (((self.beta[i] - self.lo[bi]) / alpha).max(S::zero()), true)
                } else if alpha < -ptol {
                    if !self.hi[bi].is_finite() {
                        continue;
                    }
                    (
                        ((self.hi[bi] - self.beta[i]) / (-alpha)).max(S::zero()),
                        false,
                    )
                } else {
                    continue;
                };
                let tie = S::lit(1e-12) * (S::one() + cand.abs());
                let better = match leave {
                    None => cand <= step,
                    Some((r, _)) => {
                        if cand < step - tie {
                            true
                        } else if cand <= step + tie {
                            if bland {
                                bi < self.basis[r]
                            } else {
                                alpha.abs() > leave_alpha
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    step = cand;
                    leave = Some((i, to_lower));
                    leave_alpha = alpha.abs();
                }
            }
            if step.is_infinite() {
                return Ok(Outcome::Unbounded);
            }
            let delta = dir * step;
            match leave {
                None => {
                    self.shift_basics(q, delta);
                    self.state[q] = match self.state[q] {
                        VarState::AtLower => VarState::AtUpper,
                        _ => VarState::AtLower,
                    };
                    self.iterations += 1;
                }
                Some((r, to_lower)) => {
                    let newv = self.nonbasic_value(q) + delta;
                    self.shift_basics(q, delta);
                    let leaving = self.basis[r];
                    self.state[leaving] = if to_lower {
                        VarState::AtLower
                    } else {
                        VarState::AtUpper
                    };
                    self.pivot(r, q);
                    self.beta[r] = newv;
                    self.state[q] = VarState::Basic;
                }
            }
        }
    }

    /// Dual simplex from a dual-feasible basis; stops at primal feasibility.
    pub(crate) fn dual(&mut self) -> Result<Outcome<S>, SolverError> {
        let start = self.iterations;
        let ptol = S::pivot_tol();
        loop {
            if self.iterations > self.limit {
                return Err(SolverError::IterationLimit(self.iterations));
            }
            let bland = self.iterations - start >= BLAND_AFTER;
            let mut leave: Option<(usize, bool)> = None;
            let mut worst = S::zero();
            for i in 0..self.m {
                let bi = self.basis[i];
                let v = self.beta[i];
                let (l, u) = (self.lo[bi], self.hi[bi]);
                let (viol, to_lower) = if v < l {
                    (l - v, true)
                } else if v > u {
                    (v - u, false)
                } else {
                    continue;
                };
                let bound = if to_lower { l } else { u };
                if viol <= S::feas_tol() * (S::one() + bound.abs()) {
                    continue;
                }
                if bland {
                    if leave.map_or(true, |(r, _)| bi < self.basis[r]) {
                        leave = Some((i, to_lower));
                    }
                } else if viol > worst {
                    worst = viol;
                    leave = Some((i, to_lower));
                }
            }
            let Some((r, to_lower)) = leave else {
                return Ok(Outcome::Optimal);
            };
            let mut enter: Option<usize> = None;
            let mut best_ratio = S::infinity();
            let mut best_abs = S::zero();
            for j in 0..self.ncols {
                let st = self.state[j];
                if st == VarState::Basic {
                    continue;
                }
                let movable = st == VarState::Free || self.hi[j] > self.lo[j];
                if !movable {
                    continue;
                }
                let trj = self.t[(r, j)];
                let can_inc = matches!(st, VarState::AtLower | VarState::Free);
                let can_dec = matches!(st, VarState::AtUpper | VarState::Free);
                let ok = if to_lower {
                    (can_inc && trj < -ptol) || (can_dec && trj > ptol)
                } else {
                    (can_inc && trj > ptol) || (can_dec && trj < -ptol)
                };
                if !ok {
                    continue;
                }
                let ratio = self.d[j].abs() / trj.abs();
                let tie = S::lit(1e-12) * (S::one() + ratio);
                let better = if ratio < best_ratio - tie {
                    true
                } else if ratio <= best_ratio + tie {
                    if bland {
                        false
                    } else {
                        trj.abs() > best_abs
                    }
                } else {
                    false
                };
                if better || enter.is_none() {
                    best_ratio = ratio;
                    best_abs = trj.abs();
                    enter = Some(j);
                }
            }
            let Some(q) = enter else {
                return Ok(Outcome::Infeasible(None));
            };
            let bl = self.basis[r];
            let target = if to_lower { self.lo[bl] } else { self.hi[bl] };
            let delta = (self.beta[r] - target) / self.t[(r, q)];
            let newv = self.nonbasic_value(q) + delta;
            self.shift_basics(q, delta);
            self.state[bl] = if to_lower {
                VarState::AtLower
            } else {
                VarState::AtUpper
            };
            self.pivot(r, q);
            self.beta[r] = newv;
            self.state[q] = VarState::Basic;
        }
    }

    fn dual_feasible(&self) -> bool {
        let tol = S::opt_tol() * S::lit(10.0);
        (0..self.ncols).all(|j| {
            let dj = self.d[j];
            match self.state[j] {
                VarState::Basic => true,
                _ if self.hi[j] <= self.lo[j] => true,
                VarState::AtLower => dj <= tol,
                VarState::AtUpper => dj >= -tol,
                VarState::Free => dj.abs() <= tol,
            }
        })
    }

    fn primal_feasible(&self) -> bool {
        (0..self.m).all(|i| {
            let bi = self.basis[i];
            let v = self.beta[i];
            let tl = S::feas_tol() * (S::one() + self.lo[bi].abs());
            let th = S::feas_tol() * (S::one() + self.hi[bi].abs());
            v >= self.lo[bi] - tl && v <= self.hi[bi] + th
        })
    }

    /// Changes the bounds of column `j` keeping the basis.
    pub(crate) fn set_bounds(&mut self, j: usize, lo: S, hi: S) {
        let old = self.nonbasic_value(j);
        self.lo[j] = lo;
        self.hi[j] = hi;
        if self.state[j] == VarState::Basic {
            return;
        }
        if self.state[j] == VarState::Free && lo.is_finite() {
            self.state[j] = VarState::AtLower;
        }
        if self.state[j] == VarState::AtUpper && !hi.is_finite() {
            self.state[j] = VarState::AtLower;
        }
        if self.state[j] == VarState::AtLower && !lo.is_finite() {
            self.state[j] = if hi.is_finite() {
                VarState::AtUpper
            } else {
                VarState::Free
            };
        }
        let new = self.nonbasic_value(j);
        self.shift_basics(j, new - old);
    }

    /// Restores optimality after bound changes; `Ok(None)` asks for a cold start.
    pub(crate) fn reoptimize(&mut self) -> Result<Option<Outcome<S>>, SolverError> {
        if !self.dual_feasible() {
            if !self.primal_feasible() {
                return Ok(None);
            }
        } else {
            match self.dual()? {
                Outcome::Optimal => {}
                other => return Ok(Some(other)),
            }
        }
        let out = self.primal()?;
        if let Outcome::Optimal = out {
            self.polish()?;
        }
        Ok(Some(out))
    }

    /// Refactorizes when accumulated round-off has grown; re-optimizes if needed.
    fn polish(&mut self) -> Result<(), SolverError> {
        let xs = self.full_values();
        let mut worst = S::zero();
        for i in 0..self.m {
            let r = crate::linalg::dot(self.a.row(i), &xs) - self.b[i];
            worst = worst.max(r.abs() / (S::one() + self.b[i].abs()));
        }
        if worst <= S::feas_tol() * S::lit(0.1) {
            return Ok(());
        }
        if !self.refactor() {
            return Err(SolverError::Numerical(
                "singular basis during refactorization".into(),
            ));
        }
        if !self.primal_feasible() && self.dual_feasible() {
            self.dual()?;
        }
        self.primal()?;
        Ok(())
    }

    fn full_values(&self) -> Vec<S> {
        let mut xs: Vec<S> = (0..self.ncols).map(|j| self.nonbasic_value(j)).collect();
        for (i, &bcol) in self.basis.iter().enumerate() {
            xs[bcol] = self.beta[i];
        }
        xs
    }

    /// Recomputes the tableau from the original columns of the current basis.
    pub(crate) fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut bm = Matrix::zeros(m, m);
        for i in 0..m {
            for (k, &c) in self.basis.iter().enumerate() {
                bm[(i, k)] = self.a[(i, c)];
            }
        }
        let Some(inv) = bm.inverse() else {
            return false;
        };
        let mut t = Matrix::zeros(m, self.ncols);
        for i in 0..m {
            for k in 0..m {
                let f = inv[(i, k)];
                if f == S::zero() {
                    continue;
                }
                let src = self.a.row(k);
                let dst = t.row_mut(i);
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = *d + f * s;
                }
            }
        }
        let mut rhs: Vec<S> = self.b.to_vec();
        for j in 0..self.ncols {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v != S::zero() {
                for (i, r) in rhs.iter_mut().enumerate() {
                    *r = *r - self.a[(i, j)] * v;
                }
            }
        }
        self.beta = inv.mul_vec(&rhs);
        self.t = t;
        let obj = self.objective.clone();
        self.set_costs(&obj);
        true
    }

    /// Rebuilds a tableau sharing this one's column layout for another basis.
    pub(crate) fn with_basis(
        &self,
        basis: &[usize],
        state: &[VarState],
        lo: &[S],
        hi: &[S],
    ) -> Option<Self> {
        let mut tab = Self {
            m: self.m,
            n: self.n,
            ncols: self.ncols,
            a: Arc::clone(&self.a),
            b: Arc::clone(&self.b),
            scale: Arc::clone(&self.scale),
            t: Matrix::zeros(0, 0),
            beta: Vec::new(),
            basis: basis.to_vec(),
            state: state.to_vec(),
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            objective: self.objective.clone(),
            d: vec![S::zero(); self.ncols],
            art_start: self.art_start,
            iterations: 0,
            limit: self.limit,
        };
        if tab.refactor() {
            Some(tab)
        } else {
            None
        }
    }

    pub(crate) fn basis_state(&self) -> (Vec<usize>, Vec<VarState>) {
        (self.basis.clone(), self.state.clone())
    }

    pub(crate) fn bounds(&self) -> (&[S], &[S]) {
        (&self.lo, &self.hi)
    }

    pub(crate) fn structural(&self) -> Vec<S> {
        let mut xs: Vec<S> = (0..self.n).map(|j| self.nonbasic_value(j)).collect();
        for (i, &bcol) in self.basis.iter().enumerate() {
            if bcol < self.n {
                xs[bcol] = self.beta[i];
            }
        }
        xs
    }

    pub(crate) fn objective_value(&self) -> S {
        let xs = self.structural();
        xs.iter()
            .zip(&self.objective)
            .fold(S::zero(), |a, (&x, &c)| a + x * c)
    }

    /// Row multipliers in the caller's units.
    pub(crate) fn duals(&self) -> Vec<S> {
        (0..self.m)
            .map(|i| -self.d[self.n + i] * self.scale[i])
            .collect()
    }

    pub(crate) fn reduced_costs(&self) -> Vec<S> {
        self.d[..self.n].to_vec()
    }

    pub(crate) fn basis_cols(&self) -> Vec<usize> {
        self.basis.clone()
    }

    pub(crate) fn snapshot(&self, rhs: &[S]) -> BasisSnapshot<S> {
        let m = self.m;
        let mut binv = Matrix::zeros(m, m);
        for i in 0..m {
            for k in 0..m {
                binv[(i, k)] = self.t[(i, self.n + k)] * self.scale[k];
            }
        }
        let shift = (0..m)
            .map(|i| self.beta[i] - crate::linalg::dot(binv.row(i), rhs))
            .collect();
        BasisSnapshot {
            cols: self.basis.clone(),
            binv,
            shift,
            lower: self.basis.iter().map(|&c| self.lo[c]).collect(),
            upper: self.basis.iter().map(|&c| self.hi[c]).collect(),
        }
    }

    #[allow(dead_code)]
    pub(crate) fn value(&self, j: usize) -> S {
        self.value_of(j)
    }
}
