//! Small dense row-major matrix used by the solvers.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Matrix<S: Scalar> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols, "ragged matrix rows");
            m.row_mut(i).copy_from_slice(r);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn push_row(&mut self, row: &[S]) {
        if self.rows == 0 && self.cols == 0 {
            self.cols = row.len();
        }
        assert_eq!(row.len(), self.cols, "row length mismatch");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    /// Appends `extra` zero columns.
    pub fn widen(&self, extra: usize) -> Self {
        let mut m = Self::zeros(self.rows, self.cols + extra);
        for i in 0..self.rows {
            m.row_mut(i)[..self.cols].copy_from_slice(self.row(i));
        }
        m
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn transpose_mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![S::zero(); self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            if vi == S::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + vi * a;
            }
        }
        out
    }

    /// `row_i -= factor * row_k`.
    pub(crate) fn axpy_rows(&mut self, target: usize, source: usize, factor: S) {
        debug_assert_ne!(target, source);
        let cols = self.cols;
        let (t0, s0) = (target * cols, source * cols);
        if t0 < s0 {
            let (lo, hi) = self.data.split_at_mut(s0);
            let t = &mut lo[t0..t0 + cols];
            let s = &hi[..cols];
            for (a, &b) in t.iter_mut().zip(s) {
                *a = *a - factor * b;
            }
        } else {
            let (lo, hi) = self.data.split_at_mut(t0);
            let s = &lo[s0..s0 + cols];
            let t = &mut hi[..cols];
            for (a, &b) in t.iter_mut().zip(s) {
                *a = *a - factor * b;
            }
        }
    }

    /// Gauss–Jordan inverse with partial pivoting; `None` when singular.
    pub fn inverse(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let mut best = col;
            let mut best_abs = a[(col, col)].abs();
            for r in col + 1..n {
                let v = a[(r, col)].abs();
                if v > best_abs {
                    best = r;
                    best_abs = v;
                }
            }
            if best_abs <= S::epsilon() * S::lit(16.0) {
                return None;
            }
            if best != col {
                a.swap_rows(best, col);
                inv.swap_rows(best, col);
            }
            let p = a[(col, col)];
            for v in a.row_mut(col) {
                *v = *v / p;
            }
            for v in inv.row_mut(col) {
                *v = *v / p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                if f != S::zero() {
                    a.axpy_rows(r, col, f);
                    inv.axpy_rows(r, col, f);
                }
            }
        }
        Some(inv)
    }

    fn swap_rows(&mut self, i: usize, k: usize) {
        if i == k {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(i * self.cols + j, k * self.cols + j);
        }
    }

    /// Symmetric positive semidefinite test via a pivoted LDLᵀ sweep.
    pub fn is_psd(&self, tol: S) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let n = self.rows;
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (self[(i, j)], self[(j, i)]);
                if (a - b).abs() > tol * (S::one() + a.abs().max(b.abs())) {
                    return false;
                }
            }
        }
        let scale = (0..n).map(|i| self[(i, i)].abs()).fold(S::zero(), S::max);
        let eps = tol * (S::one() + scale);
        let mut a = self.clone();
        let mut active: Vec<usize> = (0..n).collect();
        while !active.is_empty() {
            let (pos, &k) = active
                .iter()
                .enumerate()
                .max_by(|x, y| a[(*x.1, *x.1)].partial_cmp(&a[(*y.1, *y.1)]).unwrap())
                .unwrap();
            let piv = a[(k, k)];
            if piv < -eps {
                return false;
            }
            active.remove(pos);
            if piv <= eps {
                // remaining block must vanish on this row
                if active
                    .iter()
                    .any(|&j| a[(k, j)].abs() > eps.sqrt() * (S::one() + scale).sqrt())
                {
                    return false;
                }
                continue;
            }
            for &i in &active {
                let f = a[(i, k)] / piv;
                for &j in &active {
                    a[(i, j)] = a[(i, j)] - f * a[(k, j)];
                }
            }
        }
        true
    }
}

impl<S: Scalar> Matrix<S> {
    /// Lower factor `L` with `L·Lᵀ = self` for a symmetric PSD matrix; zero
    /// pivots leave their column empty. `None` on a clearly negative pivot.
    pub fn cholesky(&self) -> Option<Self> {
        let n = self.rows;
        let scale = (0..n).map(|i| self[(i, i)].abs()).fold(S::zero(), S::max);
        let eps = S::lit(1e-12) * (S::one() + scale);
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if d < -eps {
                return None;
            }
            if d <= eps {
                continue;
            }
            let r = d.sqrt();
            l[(j, j)] = r;
            for i in j + 1..n {
                let mut v = self[(i, j)];
                for k in 0..j {
                    v = v - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / r;
            }
        }
        Some(l)
    }
}

impl<S: Scalar> Index<(usize, usize)> for Matrix<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S: Scalar> IndexMut<(usize, usize)> for Matrix<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm2<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let m = Matrix::from_rows(&[
            vec![2.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 4.0],
        ]);
        let inv = m.inverse().unwrap();
        for i in 0..3 {
            let e: Vec<f64> = (0..3).map(|k| inv[(k, i)]).collect();
            let back = m.mul_vec(&e);
            for (k, v) in back.iter().enumerate() {
                let want = if k == i { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_has_no_inverse() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(m.inverse().is_none());
    }

    #[test]
    fn psd_detection() {
        let ok = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]);
        let singular = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let bad = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(ok.is_psd(1e-12));
        assert!(singular.is_psd(1e-12));
        assert!(!bad.is_psd(1e-12));
    }
}
