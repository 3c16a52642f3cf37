//! Partition-then-extract: FIFO worklist over (region, incumbent piece,
//! explored binaries), exploration MILPs with bounding and integer cuts.

use std::collections::{BTreeSet, VecDeque};
use std::time::Instant;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::mplp::{
    dual_degenerate, interior, mplp_pieces, theta_gradient, AffinePiece, Tolerances,
};
use super::{CriticalRegion, RegionSet};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::solver::{solve_lp, solve_milp, CutRow, Halfspace, Polytope};
use crate::Milp;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub max_regions: usize,
    /// Relative bounding-cut threshold ϱ.
    pub rho_rel: f64,
    /// Merge regions with identical binaries and value piece.
    pub merge: bool,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            max_regions: 10_000,
            rho_rel: 1e-6,
            merge: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PartitionStats {
    pub iterations: usize,
    pub explorations: usize,
    pub improvements: usize,
    pub regions_before_merge: usize,
    pub regions: usize,
    /// Subregions where no binary assignment is feasible.
    pub infeasible_regions: usize,
    pub dual_degenerate_regions: usize,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug)]
struct Incumbent {
    y: Vec<f64>,
    piece: AffinePiece,
}

#[derive(Clone, Debug)]
struct Task {
    region: Polytope<f64>,
    incumbent: Option<Incumbent>,
    explored: BTreeSet<Vec<u8>>,
}

fn key(y: &[f64]) -> Vec<u8> {
    y.iter().map(|&v| (v > 0.5) as u8).collect()
}

/// Exploration model: the MILP with θ turned into shifted columns
/// `t = θ − lo ≥ 0`.
pub(crate) struct Explorer<'a> {
    model: &'a Milp,
    base: Milp,
    lo: Vec<f64>,
}

impl<'a> Explorer<'a> {
    pub(crate) fn new(model: &'a Milp, lo: Vec<f64>) -> Self {
        let (p, n) = (model.p(), model.theta_dim());
        let mut a = crate::linalg::Matrix::zeros(0, p + n);
        let mut row = vec![0.0; p + n];
        let mut b = Vec::with_capacity(model.rows());
        for i in 0..model.rows() {
            row[..p].copy_from_slice(model.a.row(i));
            for k in 0..n {
                row[p + k] = -model.f[(i, k)];
            }
            a.push_row(&row);
            b.push(model.b[i] + dot(model.f.row(i), &lo));
        }
        let mut c = model.c.clone();
        c.extend(std::iter::repeat(0.0).take(n));
        let mut x_names = model.x_names.clone();
        x_names.extend((0..n).map(|k| format!("theta[{k}]")));
        let base = Milp {
            c,
            d: model.d.clone(),
            a,
            e: model.e.clone(),
            b,
            f: crate::linalg::Matrix::zeros(model.rows(), 0),
            sense: model.sense.clone(),
            row_tags: model.row_tags.clone(),
            x_names,
            y_names: model.y_names.clone(),
        };
        Self { model, base, lo }
    }

    /// Binary vector beating `incumbent + ϱ` somewhere in `region`, excluding
    /// every explored assignment.
    pub(crate) fn explore(
        &self,
        region: &Polytope<f64>,
        incumbent: Option<(&AffinePiece, f64)>,
        explored: &BTreeSet<Vec<u8>>,
    ) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let (p, q, n) = (self.model.p(), self.model.q(), self.model.theta_dim());
        let mut m = self.base.clone();
        let mut cuts = Vec::new();
        for h in &region.ineqs {
            let mut xc = vec![0.0; p + n];
            xc[p..].copy_from_slice(&h.e);
            cuts.push(CutRow {
                x_coeffs: xc,
                y_coeffs: vec![0.0; q],
                rhs: -h.f - dot(&h.e, &self.lo),
            });
        }
        if let Some((piece, rho)) = incumbent {
            // c'x + d'y − a'θ ≥ g + ϱ
            let mut xc: Vec<f64> = self.model.c.iter().map(|v| -v).collect();
            xc.extend(piece.a.iter().copied());
            cuts.push(CutRow {
                x_coeffs: xc,
                y_coeffs: self.model.d.iter().map(|v| -v).collect(),
                rhs: -piece.g - rho - dot(&piece.a, &self.lo),
            });
            for k in 0..n {
                m.c[p + k] = -piece.a[k];
            }
        }
        for y in explored {
            let mut yc = vec![0.0; q];
            let mut ones = 0.0;
            for (j, &b) in y.iter().enumerate() {
                if b == 1 {
                    yc[j] = 1.0;
                    ones += 1.0;
                } else {
                    yc[j] = -1.0;
                }
            }
            cuts.push(CutRow {
                x_coeffs: vec![0.0; p + n],
                y_coeffs: yc,
                rhs: ones - 1.0,
            });
        }
        let sol = solve_milp(&m, &[], &cuts)?;
        if !sol.is_optimal() {
            return Ok(None);
        }
        let theta = sol.x[p..]
            .iter()
            .zip(&self.lo)
            .map(|(t, l)| t + l)
            .collect();
        Ok(Some((sol.y, theta)))
    }
}

/// Dual-based LMWV at an interior point: the θ-gradient `F'λ` of the LP
/// value at fixed binaries, with a flag when the duals are not unique.
pub fn extract_lmwv(model: &Milp, y: &[f64], theta: &[f64]) -> Result<(Vec<f64>, bool)> {
    let sol = solve_lp(model, theta, Some(y))?;
    if !sol.is_optimal() {
        return Err(Error::Infeasible(format!(
            "binaries infeasible at θ = {theta:?}"
        )));
    }
    let degenerate = dual_degenerate(&sol, model.p());
    if degenerate {
        debug!("alternative optimal duals at θ = {theta:?}");
    }
    Ok((theta_gradient(model, &sol.duals), degenerate))
}

/// Multipliers of the rows tagged `end-storage-lower[..]`, in row order.
pub fn end_storage_duals(model: &Milp, y: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    let sol = solve_lp(model, theta, Some(y))?;
    if !sol.is_optimal() {
        return Err(Error::Infeasible(format!(
            "binaries infeasible at θ = {theta:?}"
        )));
    }
    Ok(model
        .row_tags
        .iter()
        .zip(&sol.duals)
        .filter(|(t, _)| t.starts_with("end-storage-lower["))
        .map(|(_, &d)| d)
        .collect())
}

/// Lower and upper value of `e'θ + f` over the region.
fn range(region: &Polytope<f64>, e: &[f64], f: f64) -> Result<(f64, f64)> {
    let hi = region.maximize(e)?.map_or(f64::NEG_INFINITY, |v| v.0 + f);
    let neg: Vec<f64> = e.iter().map(|v| -v).collect();
    let lo = region.maximize(&neg)?.map_or(f64::INFINITY, |v| -v.0 + f);
    Ok((lo, hi))
}

/// Covers `space` with critical regions of the parametric MILP.
pub fn partition_then_extract(
    model: &Milp,
    space: &Polytope<f64>,
    y_init: Option<&[f64]>,
    config: &PartitionConfig,
) -> Result<(RegionSet, PartitionStats)> {
    let start = Instant::now();
    if space.dim != model.theta_dim() {
        return Err(Error::Domain(
            "parameter polytope dimension differs from the model".into(),
        ));
    }
    let tol = Tolerances::for_space(space);
    let Some((center, _)) = interior(space, &tol)? else {
        return Err(Error::Domain("parameter space has no interior".into()));
    };
    let (lo, hi) = box_of(space)?;
    let explorer = Explorer::new(model, lo.clone());
    let mut stats = PartitionStats::default();

    let y0 = match y_init {
        Some(y) => y.to_vec(),
        None => {
            let s = solve_milp(model, &center, &[])?;
            if s.is_optimal() {
                s.y
            } else {
                match explorer.explore(space, None, &BTreeSet::new())? {
                    Some((y, _)) => y,
                    None => {
                        return Err(Error::Infeasible(
                            "MILP infeasible on the whole parameter space".into(),
                        ))
                    }
                }
            }
        }
    };
    if y0.len() != model.q() {
        return Err(Error::Domain(
            "initial binary vector has the wrong length".into(),
        ));
    }

    let mut queue = VecDeque::new();
    let first = BTreeSet::from([key(&y0)]);
    for piece in mplp_pieces(model, &y0, space, &tol)? {
        queue.push_back(Task {
            region: piece.region,
            incumbent: piece.value.map(|v| Incumbent {
                y: y0.clone(),
                piece: v,
            }),
            explored: first.clone(),
        });
    }

    let mut finals: Vec<CriticalRegion> = Vec::new();
    while let Some(task) = queue.pop_front() {
        stats.iterations += 1;
        if queue.len() + finals.len() > config.max_regions {
            return Err(Error::Resource(format!(
                "partition exceeded {} regions (iteration cap)",
                config.max_regions
            )));
        }
        let Some((c, _)) = interior(&task.region, &tol)? else {
            continue;
        };
        let inc = task.incumbent.as_ref().map(|i| {
            let rho = config.rho_rel * (1.0 + i.piece.eval(&c).abs());
            (&i.piece, rho)
        });
        stats.explorations += 1;
        let found = explorer.explore(&task.region, inc, &task.explored)?;
        let Some((y_new, _)) = found else {
            match task.incumbent {
                Some(i) => finals.push(finalize(model, &task.region, i, &tol)?),
                None => stats.infeasible_regions += 1,
            }
            continue;
        };
        stats.improvements += 1;
        let mut explored = task.explored.clone();
        explored.insert(key(&y_new));
        for piece in mplp_pieces(model, &y_new, &task.region, &tol)? {
            let Some(val) = piece.value else {
                queue.push_back(Task {
                    region: piece.region,
                    incumbent: task.incumbent.clone(),
                    explored: explored.clone(),
                });
                continue;
            };
            let challenger = Incumbent {
                y: y_new.clone(),
                piece: val,
            };
            let Some(cur) = &task.incumbent else {
                queue.push_back(Task {
                    region: piece.region,
                    incumbent: Some(challenger),
                    explored: explored.clone(),
                });
                continue;
            };
            // keep the pointwise best of the two pieces
            let (e, f) = challenger.piece.minus(&cur.piece);
            let scale = 1e-9 * (1.0 + cur.piece.eval(&c).abs());
            let (dmin, dmax) = range(&piece.region, &e, f)?;
            if dmax <= scale {
                queue.push_back(Task {
                    region: piece.region,
                    incumbent: Some(cur.clone()),
                    explored: explored.clone(),
                });
            } else if dmin >= -scale {
                queue.push_back(Task {
                    region: piece.region,
                    incumbent: Some(challenger),
                    explored: explored.clone(),
                });
            } else {
                let win = piece
                    .region
                    .with(Halfspace::new(e.iter().map(|v| -v).collect(), -f));
                let keep = piece.region.with(Halfspace::new(e, f));
                for (r, who) in [(keep, cur.clone()), (win, challenger)] {
                    if interior(&r, &tol)?.is_some() {
                        queue.push_back(Task {
                            region: r.reduced()?,
                            incumbent: Some(who),
                            explored: explored.clone(),
                        });
                    }
                }
            }
        }
    }

    stats.regions_before_merge = finals.len();
    if config.merge {
        finals = super::merge::merge_regions(finals, &tol)?;
    }
    for (id, r) in finals.iter_mut().enumerate() {
        r.id = id;
    }
    stats.regions = finals.len();
    stats.dual_degenerate_regions = finals.iter().filter(|r| r.dual_degenerate).count();
    if stats.dual_degenerate_regions > 0 {
        warn!(
            "{} regions have alternative optimal duals at their centers",
            stats.dual_degenerate_regions
        );
    }
    stats.wall_time_s = start.elapsed().as_secs_f64();
    Ok((
        RegionSet {
            dim: space.dim,
            lower: lo,
            upper: hi,
            regions: finals,
        },
        stats,
    ))
}

fn box_of(space: &Polytope<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lo = Vec::with_capacity(space.dim);
    let mut hi = Vec::with_capacity(space.dim);
    for k in 0..space.dim {
        let mut e = vec![0.0; space.dim];
        e[k] = 1.0;
        let (l, h) = range(space, &e, 0.0)?;
        if !l.is_finite() || !h.is_finite() {
            return Err(Error::Domain("parameter space must be bounded".into()));
        }
        lo.push(l);
        hi.push(h);
    }
    Ok((lo, hi))
}

fn finalize(
    model: &Milp,
    region: &Polytope<f64>,
    inc: Incumbent,
    tol: &Tolerances,
) -> Result<CriticalRegion> {
    let region = region.reduced()?;
    let (center, radius) = interior(&region, tol)?
        .ok_or_else(|| Error::Numeric("final region lost its interior".into()))?;
    let (pi, degenerate) = extract_lmwv(model, &inc.y, &center)?;
    Ok(CriticalRegion {
        id: 0,
        ineqs: region.ineqs,
        y_star: inc.y.iter().map(|v| v.round()).collect(),
        pi,
        value: inc.piece,
        center,
        radius,
        dual_degenerate: degenerate,
    })
}
