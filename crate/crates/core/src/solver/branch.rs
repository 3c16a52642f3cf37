//! Best-bound branch-and-bound over binary/integer columns of a [`LinearProgram`].
//!
//! Children are re-solved by the dual simplex from the parent basis. After a
//! branching step the search dives into the preferred child and stores the
//! sibling; stored nodes are popped in best-bound order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::simplex::{Outcome, Tableau, VarState};
use super::{LinearProgram, SolverError};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MipStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct MipOptions<S: Scalar> {
    pub int_tol: S,
    pub gap_abs: S,
    pub gap_rel: S,
    pub node_limit: usize,
}

impl<S: Scalar> Default for MipOptions<S> {
    fn default() -> Self {
        Self {
            int_tol: S::int_tol(),
            gap_abs: S::gap_tol(),
            gap_rel: S::lit(1e-11),
            node_limit: 2_000_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MipResult<S: Scalar> {
    pub status: MipStatus,
    pub x: Vec<S>,
    pub objective: S,
    pub nodes: usize,
}

struct Node<S: Scalar> {
    bound: S,
    seq: usize,
    depth: usize,
    layout: usize,
    lo: Vec<S>,
    hi: Vec<S>,
    basis: Vec<usize>,
    state: Vec<VarState>,
}

impl<S: Scalar> PartialEq for Node<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<S: Scalar> Eq for Node<S> {}
impl<S: Scalar> PartialOrd for Node<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<S: Scalar> Ord for Node<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .partial_cmp(&other.bound)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Search<'a, S: Scalar> {
    lp: &'a LinearProgram<S>,
    integer: &'a [usize],
    opts: &'a MipOptions<S>,
    layouts: Vec<Tableau<S>>,
    heap: BinaryHeap<Node<S>>,
    incumbent: Option<(S, Vec<S>)>,
    nodes: usize,
    seq: usize,
}

impl<'a, S: Scalar> Search<'a, S> {
    fn cutoff(&self) -> S {
        match &self.incumbent {
            Some((v, _)) => *v + self.opts.gap_abs.max(self.opts.gap_rel * v.abs()),
            None => S::neg_infinity(),
        }
    }

    /// Solves the LP with integer-column bounds overridden, from scratch.
    fn cold(&mut self, lo: &[S], hi: &[S]) -> Result<Option<(Tableau<S>, usize)>, SolverError> {
        let mut lp = self.lp.clone();
        for (k, &j) in self.integer.iter().enumerate() {
            lp.lower[j] = lo[k];
            lp.upper[j] = hi[k];
        }
        let mut tab = Tableau::new(&lp);
        match tab.solve()? {
            Outcome::Optimal => {
                self.layouts.push(tab.clone());
                Ok(Some((tab, self.layouts.len() - 1)))
            }
            Outcome::Infeasible(_) => Ok(None),
            Outcome::Unbounded => Err(SolverError::Numerical(
                "unbounded relaxation below the root".into(),
            )),
        }
    }

    fn reopt(
        &mut self,
        mut tab: Tableau<S>,
        layout: usize,
        lo: &[S],
        hi: &[S],
    ) -> Result<Option<(Tableau<S>, usize)>, SolverError> {
        match tab.reoptimize()? {
            Some(Outcome::Optimal) => Ok(Some((tab, layout))),
            Some(Outcome::Infeasible(_)) => Ok(None),
            Some(Outcome::Unbounded) => Err(SolverError::Numerical(
                "unbounded relaxation below the root".into(),
            )),
            None => self.cold(lo, hi),
        }
    }

    fn restore(&mut self, node: &Node<S>) -> Result<Option<(Tableau<S>, usize)>, SolverError> {
        let template = &self.layouts[node.layout];
        let (tlo, thi) = template.bounds();
        let (mut lo, mut hi) = (tlo.to_vec(), thi.to_vec());
        for (k, &j) in self.integer.iter().enumerate() {
            lo[j] = node.lo[k];
            hi[j] = node.hi[k];
        }
        match template.with_basis(&node.basis, &node.state, &lo, &hi) {
            Some(tab) => self.reopt(tab, node.layout, &node.lo, &node.hi),
            None => self.cold(&node.lo, &node.hi),
        }
    }

    fn most_fractional(&self, x: &[S]) -> Option<(usize, S)> {
        let mut best: Option<(usize, S)> = None;
        let mut best_dist = self.opts.int_tol;
        for (k, &j) in self.integer.iter().enumerate() {
            let v = x[j];
            let frac = v - v.floor();
            let dist = frac.min(S::one() - frac);
            if dist > best_dist {
                best_dist = dist;
                best = Some((k, v));
            }
        }
        best
    }
}

/// Maximizes `lp` with the columns in `integer` restricted to integers.
pub fn solve_mip<S: Scalar>(
    lp: &LinearProgram<S>,
    integer: &[usize],
    opts: &MipOptions<S>,
) -> Result<MipResult<S>, SolverError> {
    let mut root = Tableau::new(lp);
    match root.solve()? {
        Outcome::Optimal => {}
        Outcome::Infeasible(_) => {
            return Ok(MipResult {
                status: MipStatus::Infeasible,
                x: vec![S::zero(); lp.cols()],
                objective: S::neg_infinity(),
                nodes: 1,
            })
        }
        Outcome::Unbounded => {
            return Ok(MipResult {
                status: MipStatus::Unbounded,
                x: vec![S::zero(); lp.cols()],
                objective: S::infinity(),
                nodes: 1,
            })
        }
    }
    let depth_cap = 10 * integer.len().max(1);
    let mut search = Search {
        lp,
        integer,
        opts,
        layouts: vec![root.clone()],
        heap: BinaryHeap::new(),
        incumbent: None,
        nodes: 1,
        seq: 0,
    };
    let root_lo: Vec<S> = integer.iter().map(|&j| lp.lower[j]).collect();
    let root_hi: Vec<S> = integer.iter().map(|&j| lp.upper[j]).collect();
    let mut current = Some((root, 0usize, 0usize, root_lo, root_hi));
    loop {
        let (tab, layout, depth, lo, hi) = match current.take() {
            Some(c) => c,
            None => {
                let Some(node) = search.heap.pop() else { break };
                if node.bound <= search.cutoff() {
                    break;
                }
                search.nodes += 1;
                if search.nodes > opts.node_limit {
                    return Err(SolverError::NodeLimit(opts.node_limit));
                }
                match search.restore(&node)? {
                    Some((tab, layout)) => (tab, layout, node.depth, node.lo, node.hi),
                    None => continue,
                }
            }
        };
        let obj = tab.objective_value();
        if obj <= search.cutoff() {
            continue;
        }
        let x = tab.structural();
        let Some((k, v)) = search.most_fractional(&x) else {
            let mut xr = x;
            for &j in integer {
                xr[j] = xr[j].round();
            }
            search.incumbent = Some((obj, xr));
            continue;
        };
        if depth >= depth_cap {
            return Err(SolverError::DepthCap(depth_cap));
        }
        let j = integer[k];
        let fl = v.floor();
        let (mut down_lo, mut down_hi) = (lo.clone(), hi.clone());
        down_hi[k] = fl;
        let (mut up_lo, up_hi) = (lo, hi);
        up_lo[k] = fl + S::one();
        let _ = &mut down_lo;
        let up_first = v - fl >= S::lit(0.5);
        let ((dive_lo, dive_hi), (other_lo, other_hi)) = if up_first {
            ((up_lo, up_hi), (down_lo, down_hi))
        } else {
            ((down_lo, down_hi), (up_lo, up_hi))
        };
        let (basis, state) = tab.basis_state();
        search.seq += 1;
        search.heap.push(Node {
            bound: obj,
            seq: search.seq,
            depth: depth + 1,
            layout,
            lo: other_lo,
            hi: other_hi,
            basis,
            state,
        });
        search.nodes += 1;
        if search.nodes > opts.node_limit {
            return Err(SolverError::NodeLimit(opts.node_limit));
        }
        let mut tab = tab;
        tab.set_bounds(j, dive_lo[k], dive_hi[k]);
        if let Some((t2, l2)) = search.reopt(tab, layout, &dive_lo, &dive_hi)? {
            current = Some((t2, l2, depth + 1, dive_lo, dive_hi));
        }
    }
    let nodes = search.nodes;
    Ok(match search.incumbent {
        Some((objective, x)) => MipResult {
            status: MipStatus::Optimal,
            x,
            objective,
            nodes,
        },
        None => MipResult {
            status: MipStatus::Infeasible,
            x: vec![S::zero(); lp.cols()],
            objective: S::neg_infinity(),
            nodes,
        },
    })
}
