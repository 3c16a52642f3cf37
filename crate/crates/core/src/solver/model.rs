//! Compact parametric MILP `max c'x + d'y  s.t.  Ax + Ey ≤ b + Fθ, x ≥ 0, y ∈ {0,1}`
//! and a row builder that produces it from named linear expressions.

use serde::{Deserialize, Serialize};

use super::{RowSense, SolverError};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ParametricMilp<S: Scalar> {
    pub c: Vec<S>,
    pub d: Vec<S>,
    pub a: Matrix<S>,
    pub e: Matrix<S>,
    pub b: Vec<S>,
    pub f: Matrix<S>,
    pub sense: Vec<RowSense>,
    pub row_tags: Vec<String>,
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
}

impl<S: Scalar> ParametricMilp<S> {
    pub fn p(&self) -> usize {
        self.c.len()
    }

    pub fn q(&self) -> usize {
        self.d.len()
    }

    pub fn rows(&self) -> usize {
        self.b.len()
    }

    pub fn theta_dim(&self) -> usize {
        self.f.cols()
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let m = self.rows();
        let bad = |what: &str| Err(SolverError::Dimension(what.to_string()));
        if self.a.rows() != m || self.a.cols() != self.p() {
            return bad("A must be rows × p");
        }
        if self.e.rows() != m || self.e.cols() != self.q() {
            return bad("E must be rows × q");
        }
        if self.f.rows() != m {
            return bad("F must have one row per constraint");
        }
        if self.sense.len() != m || self.row_tags.len() != m {
            return bad("every row needs a sense and a tag");
        }
        if self.x_names.len() != self.p() || self.y_names.len() != self.q() {
            return bad("every column needs a name");
        }
        Ok(())
    }

    /// `b + Fθ − E·y` (the `y` term skipped when `None`).
    pub fn rhs_at(&self, theta: &[S], y: Option<&[S]>) -> Vec<S> {
        let ft = self.f.mul_vec(theta);
        let mut r: Vec<S> = self.b.iter().zip(&ft).map(|(&b, &v)| b + v).collect();
        if let Some(y) = y {
            let ey = self.e.mul_vec(y);
            for (ri, v) in r.iter_mut().zip(ey) {
                *ri = *ri - v;
            }
        }
        r
    }

    pub fn row_index(&self, tag: &str) -> Option<usize> {
        self.row_tags.iter().position(|t| t == tag)
    }

    /// Left-hand-side residuals `Ax + Ey − (b + Fθ)`; feasible when all ≤ 0
    /// (and `= 0` on equality rows).
    pub fn residuals(&self, x: &[S], y: &[S], theta: &[S]) -> Vec<S> {
        let ax = self.a.mul_vec(x);
        let ey = self.e.mul_vec(y);
        let rhs = self.rhs_at(theta, None);
        (0..self.rows()).map(|i| ax[i] + ey[i] - rhs[i]).collect()
    }

    pub fn max_violation(&self, x: &[S], y: &[S], theta: &[S]) -> S {
        let res = self.residuals(x, y, theta);
        let mut worst = x.iter().fold(S::zero(), |w, &v| w.max(-v));
        for (i, r) in res.into_iter().enumerate() {
            let v = match self.sense[i] {
                RowSense::Le => r,
                RowSense::Eq => r.abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    pub fn objective(&self, x: &[S], y: &[S]) -> S {
        crate::linalg::dot(&self.c, x) + crate::linalg::dot(&self.d, y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VarId {
    pub kind: VarKind,
    pub index: usize,
}

impl VarId {
    pub fn value<S: Scalar>(self, x: &[S], y: &[S]) -> S {
        match self.kind {
            VarKind::Continuous => x[self.index],
            VarKind::Binary => y[self.index],
        }
    }
}

/// Linear form in model variables and parameters plus a constant.
#[derive(Clone, Debug)]
pub struct LinExpr<S: Scalar> {
    pub terms: Vec<(VarId, S)>,
    pub theta: Vec<(usize, S)>,
    pub constant: S,
}

impl<S: Scalar> Default for LinExpr<S> {
    fn default() -> Self {
        Self {
            terms: Vec::new(),
            theta: Vec::new(),
            constant: S::zero(),
        }
    }
}

impl<S: Scalar> LinExpr<S> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: S) -> Self {
        Self {
            constant: c,
            ..Self::default()
        }
    }

    pub fn var(v: VarId, coeff: S) -> Self {
        Self {
            terms: vec![(v, coeff)],
            ..Self::default()
        }
    }

    pub fn theta(k: usize, coeff: S) -> Self {
        Self {
            theta: vec![(k, coeff)],
            ..Self::default()
        }
    }

    pub fn add(&mut self, v: VarId, coeff: S) -> &mut Self {
        self.terms.push((v, coeff));
        self
    }

    pub fn add_theta(&mut self, k: usize, coeff: S) -> &mut Self {
        self.theta.push((k, coeff));
        self
    }

    pub fn add_constant(&mut self, c: S) -> &mut Self {
        self.constant = self.constant + c;
        self
    }

    pub fn add_expr(&mut self, other: &LinExpr<S>, factor: S) -> &mut Self {
        self.terms
            .extend(other.terms.iter().map(|&(v, c)| (v, c * factor)));
        self.theta
            .extend(other.theta.iter().map(|&(k, c)| (k, c * factor)));
        self.constant = self.constant + other.constant * factor;
        self
    }

    pub fn scaled(&self, factor: S) -> Self {
        let mut out = Self::new();
        out.add_expr(self, factor);
        out
    }

    /// Value at a point; `theta` may be empty when the expression has no
    /// parameter terms.
    pub fn eval(&self, x: &[S], y: &[S], theta: &[S]) -> S {
        let mut v = self.constant;
        for &(var, c) in &self.terms {
            v = v + c * var.value(x, y);
        }
        for &(k, c) in &self.theta {
            v = v + c * theta[k];
        }
        v
    }

    pub fn minus(&self, other: &LinExpr<S>) -> Self {
        let mut out = self.clone();
        out.add_expr(other, -S::one());
        out
    }
}

struct PendingRow<S: Scalar> {
    expr: LinExpr<S>,
    sense: RowSense,
    tag: String,
}

/// Accumulates named variables and rows, then emits a [`ParametricMilp`].
pub struct ModelBuilder<S: Scalar> {
    theta_dim: usize,
    x_names: Vec<String>,
    y_names: Vec<String>,
    c: Vec<S>,
    d: Vec<S>,
    rows: Vec<PendingRow<S>>,
}

impl<S: Scalar> ModelBuilder<S> {
    pub fn new(theta_dim: usize) -> Self {
        Self {
            theta_dim,
            x_names: Vec::new(),
            y_names: Vec::new(),
            c: Vec::new(),
            d: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn continuous(&mut self, name: impl Into<String>) -> VarId {
        self.x_names.push(name.into());
        self.c.push(S::zero());
        VarId {
            kind: VarKind::Continuous,
            index: self.x_names.len() - 1,
        }
    }

    pub fn binary(&mut self, name: impl Into<String>) -> VarId {
        self.y_names.push(name.into());
        self.d.push(S::zero());
        VarId {
            kind: VarKind::Binary,
            index: self.y_names.len() - 1,
        }
    }

    pub fn add_objective(&mut self, v: VarId, coeff: S) {
        match v.kind {
            VarKind::Continuous => self.c[v.index] = self.c[v.index] + coeff,
            VarKind::Binary => self.d[v.index] = self.d[v.index] + coeff,
        }
    }

    pub fn add_objective_expr(&mut self, expr: &LinExpr<S>) {
        for &(v, c) in &expr.terms {
            self.add_objective(v, c);
        }
    }

    /// `lhs ≤ rhs`.
    pub fn le(&mut self, lhs: &LinExpr<S>, rhs: &LinExpr<S>, tag: impl Into<String>) {
        self.rows.push(PendingRow {
            expr: lhs.minus(rhs),
            sense: RowSense::Le,
            tag: tag.into(),
        });
    }

    /// `lhs = rhs`.
    pub fn eq(&mut self, lhs: &LinExpr<S>, rhs: &LinExpr<S>, tag: impl Into<String>) {
        self.rows.push(PendingRow {
            expr: lhs.minus(rhs),
            sense: RowSense::Eq,
            tag: tag.into(),
        });
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn build(self) -> ParametricMilp<S> {
        let m = self.rows.len();
        let (p, q) = (self.x_names.len(), self.y_names.len());
        let mut a = Matrix::zeros(m, p);
        let mut e = Matrix::zeros(m, q);
        let mut f = Matrix::zeros(m, self.theta_dim);
        let mut b = vec![S::zero(); m];
        let mut sense = Vec::with_capacity(m);
        let mut tags = Vec::with_capacity(m);
        for (i, row) in self.rows.into_iter().enumerate() {
            for (v, coeff) in row.expr.terms {
                match v.kind {
                    VarKind::Continuous => a[(i, v.index)] = a[(i, v.index)] + coeff,
                    VarKind::Binary => e[(i, v.index)] = e[(i, v.index)] + coeff,
                }
            }
            for (k, coeff) in row.expr.theta {
                f[(i, k)] = f[(i, k)] - coeff;
            }
            b[i] = S::zero() - row.expr.constant;
            sense.push(row.sense);
            tags.push(row.tag);
        }
        ParametricMilp {
            c: self.c,
            d: self.d,
            a,
            e,
            b,
            f,
            sense,
            row_tags: tags,
            x_names: self.x_names,
            y_names: self.y_names,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_moves_constants_and_parameters_to_the_right() {
        let mut mb = ModelBuilder::<f64>::new(1);
        let x = mb.continuous("x");
        let y = mb.binary("y");
        mb.add_objective(x, 1.0);
        mb.add_objective(y, 0.3);
        // x + 0.6 y ≤ 1
        let mut lhs = LinExpr::var(x, 1.0);
        lhs.add(y, 0.6);
        mb.le(&lhs, &LinExpr::constant(1.0), "cap");
        // x ≤ θ
        mb.le(&LinExpr::var(x, 1.0), &LinExpr::theta(0, 1.0), "theta");
        let m = mb.build();
        m.validate().unwrap();
        assert_eq!(m.b, vec![1.0, 0.0]);
        assert_eq!(m.f[(1, 0)], 1.0);
        assert_eq!(m.e[(0, 0)], 0.6);
        assert_eq!(m.row_index("theta"), Some(1));
    }
}
