//! Right-hand-side mp-LP at fixed binaries: every optimal basis becomes a
//! critical region, the rest of the polytope is covered by reversing one
//! region inequality at a time.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::solver::{solve_lp, CenterResult, Halfspace, LpSolution, LpStatus, Polytope};
use crate::Milp;

/// `J(θ) = a'θ + g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub a: Vec<f64>,
    pub g: f64,
}

impl AffinePiece {
    pub fn eval(&self, theta: &[f64]) -> f64 {
        dot(&self.a, theta) + self.g
    }

    /// `self − other` as a halfspace-ready pair `(e, f)`.
    pub fn minus(&self, other: &AffinePiece) -> (Vec<f64>, f64) {
        (
            self.a.iter().zip(&other.a).map(|(x, y)| x - y).collect(),
            self.g - other.g,
        )
    }
}

#[derive(Clone, Debug)]
pub struct MpPiece {
    pub region: Polytope<f64>,
    /// `None` where the fixed binaries are infeasible.
    pub value: Option<AffinePiece>,
    pub duals: Vec<f64>,
    pub dual_degenerate: bool,
}

/// Geometry tolerances shared by the partitioner.
#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    /// Regions whose Chebyshev radius falls below this are dropped.
    pub min_radius: f64,
    /// Slack when testing region membership.
    pub contain: f64,
}

impl Tolerances {
    pub fn for_space(space: &Polytope<f64>) -> Self {
        let span = bounding_span(space);
        Self {
            min_radius: 1e-9 * (1.0 + span),
            contain: 1e-7,
        }
    }
}

fn bounding_span(p: &Polytope<f64>) -> f64 {
    let mut span: f64 = 0.0;
    for k in 0..p.dim {
        let mut e = vec![0.0; p.dim];
        e[k] = 1.0;
        let hi = p.maximize(&e).ok().flatten().map(|v| v.0);
        e[k] = -1.0;
        let lo = p.maximize(&e).ok().flatten().map(|v| -v.0);
        if let (Some(h), Some(l)) = (hi, lo) {
            if h.is_finite() && l.is_finite() {
                span = span.max(h - l);
            }
        }
    }
    span
}

/// Interior point and radius; `None` when the region has no interior.
pub fn interior(p: &Polytope<f64>, tol: &Tolerances) -> Result<Option<(Vec<f64>, f64)>> {
    match p.chebyshev()? {
        CenterResult::Center { point, radius } if radius > tol.min_radius => {
            Ok(Some((point, radius)))
        }
        CenterResult::Center { .. } | CenterResult::Empty => Ok(None),
        CenterResult::Unbounded => Err(Error::Domain("parameter region is unbounded".into())),
    }
}

/// `b − E·y` and `F`, the effective right-hand side as an affine map of θ.
fn rhs_map<'a>(model: &'a Milp, y: &[f64]) -> (Vec<f64>, &'a Matrix<f64>) {
    let base = (0..model.rows())
        .map(|i| model.b[i] - dot(model.e.row(i), y))
        .collect();
    (base, &model.f)
}

pub(crate) fn theta_gradient(model: &Milp, duals: &[f64]) -> Vec<f64> {
    let n = model.theta_dim();
    let mut a = vec![0.0; n];
    for (i, &w) in duals.iter().enumerate() {
        if w != 0.0 {
            for (k, ak) in a.iter_mut().enumerate() {
                *ak += w * model.f[(i, k)];
            }
        }
    }
    a
}

/// True when some nonbasic column prices out at zero, i.e. the optimal duals
/// are not unique.
pub(crate) fn dual_degenerate(sol: &LpSolution<f64>, p: usize) -> bool {
    let basic: std::collections::BTreeSet<usize> = sol.basis.iter().copied().collect();
    let tiny = 1e-9;
    let structural = (0..p).any(|j| !basic.contains(&j) && sol.reduced_costs[j].abs() < tiny);
    let slack = sol
        .duals
        .iter()
        .enumerate()
        .any(|(i, d)| !basic.contains(&(p + i)) && d.abs() < tiny);
    structural || slack
}

enum Local {
    Optimal {
        cr: Vec<Halfspace<f64>>,
        value: AffinePiece,
        duals: Vec<f64>,
        degenerate: bool,
    },
    Infeasible(Halfspace<f64>),
}

fn local_region(model: &Milp, y: &[f64], theta: &[f64]) -> Result<Local> {
    let sol = solve_lp(model, theta, Some(y))?;
    let (base, f) = rhs_map(model, y);
    match sol.status {
        LpStatus::Infeasible => {
            let cert = sol
                .certificate
                .as_ref()
                .ok_or_else(|| Error::Numeric("infeasible LP without a certificate".into()))?;
            let e = (0..model.theta_dim())
                .map(|k| (0..model.rows()).map(|i| cert.weights[i] * f[(i, k)]).sum())
                .collect();
            let off = dot(&cert.weights, &base) + cert.offset;
            Ok(Local::Infeasible(Halfspace::new(e, off)))
        }
        LpStatus::Unbounded => Err(Error::Domain(format!("LP unbounded at θ = {theta:?}"))),
        LpStatus::Optimal => {
            let snap = sol
                .snapshot
                .as_ref()
                .ok_or_else(|| Error::Numeric("optimal LP without a basis snapshot".into()))?;
            let n = model.theta_dim();
            let mut cr = Vec::new();
            for i in 0..snap.cols.len() {
                let row = snap.binv.row(i);
                let grad: Vec<f64> = (0..n)
                    .map(|k| (0..model.rows()).map(|r| row[r] * f[(r, k)]).sum())
                    .collect();
                let c = dot(row, &base) + snap.shift[i];
                let gnorm = crate::linalg::norm2(&grad);
                let (lo, hi) = (snap.lower[i], snap.upper[i]);
                if gnorm < 1e-11 * (1.0 + c.abs()) {
                    // value does not move with θ; optimal at θ so it stays so
                    continue;
                }
                if lo.is_finite() {
                    cr.push(Halfspace::new(grad.iter().map(|v| -v).collect(), lo - c));
                }
                if hi.is_finite() {
                    cr.push(Halfspace::new(grad.clone(), c - hi));
                }
            }
            let a = theta_gradient(model, &sol.duals);
            let g = sol.objective - dot(&a, theta);
            Ok(Local::Optimal {
                degenerate: dual_degenerate(&sol, model.p()),
                cr,
                value: AffinePiece { a, g },
                duals: sol.duals,
            })
        }
    }
}

fn same_halfspace(a: &Halfspace<f64>, b: &Halfspace<f64>) -> bool {
    (a.f - b.f).abs() < 1e-9 && a.e.iter().zip(&b.e).all(|(x, y)| (x - y).abs() < 1e-9)
}

/// Rows of `new` that are not implied by `outer` and the other new rows.
fn facets_of(outer: &Polytope<f64>, new: &Polytope<f64>) -> Result<Vec<Halfspace<f64>>> {
    let mut all = outer.ineqs.clone();
    let start = all.len();
    all.extend(new.ineqs.iter().cloned());
    let kept = crate::solver::remove_redundant(&all, outer.dim)?;
    Ok(all[start..]
        .iter()
        .filter(|h| kept.iter().any(|k| same_halfspace(k, h)))
        .filter(|h| !outer.ineqs.iter().any(|o| same_halfspace(o, h)))
        .cloned()
        .collect())
}

/// Partition of `space` by the optimal bases of the LP at binaries `y`,
/// including flagged pieces where `y` is infeasible.
pub fn mplp_pieces(
    model: &Milp,
    y: &[f64],
    space: &Polytope<f64>,
    tol: &Tolerances,
) -> Result<Vec<MpPiece>> {
    let mut out = Vec::new();
    let mut queue = VecDeque::from([space.clone()]);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut guard = 0usize;
    while let Some(p) = queue.pop_front() {
        guard += 1;
        if guard > 200_000 {
            return Err(Error::Resource(
                "mp-LP exploration exceeded 200000 subregions".into(),
            ));
        }
        let Some((center, radius)) = interior(&p, tol)? else {
            continue;
        };
        // a primal-degenerate vertex yields a flat region; nudge the point
        let mut found = None;
        for attempt in 0..12 {
            let theta: Vec<f64> = if attempt == 0 {
                center.clone()
            } else {
                let dir: Vec<f64> = (0..p.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let nrm = crate::linalg::norm2(&dir).max(1e-12);
                center
                    .iter()
                    .zip(&dir)
                    .map(|(c, d)| c + 0.5 * radius * d / nrm)
                    .collect()
            };
            match local_region(model, y, &theta)? {
                Local::Infeasible(h) => {
                    found = Some(Local::Infeasible(h));
                    break;
                }
                Local::Optimal {
                    cr,
                    value,
                    duals,
                    degenerate,
                } => {
                    let mut region = p.clone();
                    for h in cr {
                        region.push(h);
                    }
                    if interior(&region, tol)?.is_some() {
                        found = Some(Local::Optimal {
                            cr: region.ineqs,
                            value,
                            duals,
                            degenerate,
                        });
                        break;
                    }
                }
            }
        }
        match found {
            None => {
                return Err(Error::Numeric(format!(
                    "no full-dimensional critical region near θ = {center:?}"
                )))
            }
            Some(Local::Infeasible(h)) => {
                let bad = p.with(h.clone());
                let rest = p.with(h.flipped());
                if interior(&bad, tol)?.is_some() {
                    out.push(MpPiece {
                        region: bad.reduced()?,
                        value: None,
                        duals: Vec::new(),
                        dual_degenerate: false,
                    });
                }
                queue.push_back(rest);
            }
            Some(Local::Optimal {
                cr,
                value,
                duals,
                degenerate,
            }) => {
                let region = Polytope::new(p.dim, cr);
                let facets = facets_of(
                    &p,
                    &Polytope::new(p.dim, region.ineqs[p.ineqs.len()..].to_vec()),
                )?;
                out.push(MpPiece {
                    region: region.reduced()?,
                    value: Some(value),
                    duals,
                    dual_degenerate: degenerate,
                });
                let mut prefix = p.clone();
                for h in facets {
                    queue.push_back(prefix.with(h.flipped()));
                    prefix.push(h);
                }
            }
        }
    }
    Ok(out)
}

/// mp-LP at fixed binaries; an error when `y` is infeasible on the whole
/// polytope.
pub fn solve_mplp(model: &Milp, fixed_y: &[f64], space: &Polytope<f64>) -> Result<Vec<MpPiece>> {
    if fixed_y.len() != model.q() {
        return Err(Error::Domain(format!(
            "binary vector has length {}, model has {}",
            fixed_y.len(),
            model.q()
        )));
    }
    if space.dim != model.theta_dim() {
        return Err(Error::Domain(
            "parameter polytope dimension differs from the model".into(),
        ));
    }
    let tol = Tolerances::for_space(space);
    let pieces = mplp_pieces(model, fixed_y, space, &tol)?;
    if pieces.iter().all(|p| p.value.is_none()) {
        return Err(Error::Infeasible(
            "fixed binaries infeasible on the whole parameter polytope".into(),
        ));
    }
    Ok(pieces)
}
