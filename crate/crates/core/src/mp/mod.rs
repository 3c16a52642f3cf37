//! Multiparametric engine: critical regions of the future-period MILP over
//! carryover storage, locational marginal water values, and the if-then
//! valuation rules built from them.

mod merge;
mod mplp;
mod partition;

use std::io::Write;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use mplp::{interior, mplp_pieces, solve_mplp, AffinePiece, MpPiece, Tolerances};
pub use partition::{
    end_storage_duals, extract_lmwv, partition_then_extract, PartitionConfig, PartitionStats,
};

use crate::error::{Error, Result};
use crate::future::linearize_product;
use crate::linalg::dot;
use crate::solver::{Halfspace, LinExpr, ModelBuilder, Polytope, VarId};

/// Membership slack for `e'θ + f ≤ 0` with unit normals.
pub const CONTAIN_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalRegion {
    pub id: usize,
    /// `e'θ + f ≤ 0`, unit normals, no redundant rows.
    pub ineqs: Vec<Halfspace<f64>>,
    pub y_star: Vec<f64>,
    /// LMWV per reservoir, MWh/Mm³.
    pub pi: Vec<f64>,
    pub value: AffinePiece,
    #[serde(default)]
    pub center: Vec<f64>,
    #[serde(default)]
    pub radius: f64,
    #[serde(default)]
    pub dual_degenerate: bool,
}

impl CriticalRegion {
    /// Largest row value; ≤ 0 inside.
    pub fn violation(&self, theta: &[f64]) -> f64 {
        self.ineqs
            .iter()
            .map(|h| h.eval(theta))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, theta: &[f64], tol: f64) -> bool {
        self.violation(theta) <= tol
    }

    pub fn polytope(&self) -> Polytope<f64> {
        Polytope::new(self.pi.len(), self.ineqs.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSet {
    pub dim: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub regions: Vec<CriticalRegion>,
}

/// Index of the containing region with the lowest id, else the nearest one
/// flagged as a fallback.
fn locate(regions: &[CriticalRegion], theta: &[f64]) -> Option<(usize, bool)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, r) in regions.iter().enumerate() {
        let v = r.violation(theta);
        if v <= CONTAIN_TOL {
            return Some((k, false));
        }
        if best.map_or(true, |(_, b)| v < b) {
            best = Some((k, v));
        }
    }
    best.map(|(k, _)| (k, true))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub points: usize,
    pub uncovered: usize,
    /// Points strictly inside two or more regions.
    pub overlapping: usize,
}

impl CoverageReport {
    pub fn exact(&self) -> bool {
        self.uncovered == 0 && self.overlapping == 0
    }
}

impl RegionSet {
    pub fn locate(&self, theta: &[f64]) -> Option<(usize, bool)> {
        locate(&self.regions, theta)
    }

    pub fn coverage(&self, points: &[Vec<f64>]) -> CoverageReport {
        coverage(&self.regions, points)
    }
}

fn coverage(regions: &[CriticalRegion], points: &[Vec<f64>]) -> CoverageReport {
    let mut rep = CoverageReport {
        points: points.len(),
        ..Default::default()
    };
    for p in points {
        let v: Vec<f64> = regions.iter().map(|r| r.violation(p)).collect();
        if !v.iter().any(|&x| x <= CONTAIN_TOL) {
            rep.uncovered += 1;
        } else if v.iter().filter(|&&x| x < -CONTAIN_TOL).count() > 1 {
            rep.overlapping += 1;
        }
    }
    rep
}

/// `per_dim^N` points, endpoints included.
pub fn uniform_grid(lower: &[f64], upper: &[f64], per_dim: usize) -> Vec<Vec<f64>> {
    let n = lower.len();
    let per = per_dim.max(1);
    let total = per.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            (0..n)
                .map(|k| {
                    let i = idx % per;
                    idx /= per;
                    if per == 1 {
                        0.5 * (lower[k] + upper[k])
                    } else {
                        lower[k] + (upper[k] - lower[k]) * i as f64 / (per - 1) as f64
                    }
                })
                .collect()
        })
        .collect()
}

pub fn hash_text(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RulesMeta {
    #[serde(default)]
    pub forecast_hash: String,
    #[serde(default)]
    pub l: usize,
    #[serde(default)]
    pub omega: f64,
    #[serde(default)]
    pub reservoirs: Vec<String>,
    #[serde(default)]
    pub dual_degenerate_regions: usize,
    #[serde(default)]
    pub infeasible_regions: usize,
}

/// If-then rules: inside region `r`, `F(V) = Σ_n π_{r,n}(V_n − v_min_n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValuationRules {
    pub regions: Vec<CriticalRegion>,
    pub v_min: Vec<f64>,
    #[serde(default)]
    pub v_max: Vec<f64>,
    #[serde(default)]
    pub meta: RulesMeta,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleEval {
    pub region: usize,
    pub f_mwh: f64,
    /// No region contained the point; the nearest one was used.
    pub fallback: bool,
}

impl ValuationRules {
    pub fn new(set: RegionSet, v_min: Vec<f64>, meta: RulesMeta) -> Self {
        let mut meta = meta;
        meta.dual_degenerate_regions = set.regions.iter().filter(|r| r.dual_degenerate).count();
        Self {
            regions: set.regions,
            v_min,
            v_max: set.upper,
            meta,
        }
    }

    pub fn dim(&self) -> usize {
        self.v_min.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.regions.is_empty() {
            return Err(Error::Domain("rules contain no region".into()));
        }
        for r in &self.regions {
            if r.pi.len() != n || r.value.a.len() != n || r.ineqs.iter().any(|h| h.e.len() != n) {
                return Err(Error::Domain(format!(
                    "region {} has the wrong dimension",
                    r.id
                )));
            }
        }
        if !self.v_max.is_empty() && self.v_max.len() != n {
            return Err(Error::Domain("v_max length differs from v_min".into()));
        }
        Ok(())
    }

    pub fn coverage(&self, points: &[Vec<f64>]) -> CoverageReport {
        coverage(&self.regions, points)
    }

    /// Unweighted mean of π over the regions.
    pub fn mean_pi(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for r in &self.regions {
            for (a, p) in m.iter_mut().zip(&r.pi) {
                *a += p;
            }
        }
        let count = self.regions.len().max(1) as f64;
        m.iter().map(|v| v / count).collect()
    }

    pub fn future_value(&self, region: usize, v: &[f64]) -> f64 {
        self.regions[region]
            .pi
            .iter()
            .zip(v.iter().zip(&self.v_min))
            .map(|(p, (x, lo))| p * (x - lo))
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rules serialize")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(s)?;
        r.validate()?;
        Ok(r)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// Future value at carryover storage `v`.
pub fn evaluate_rules(rules: &ValuationRules, v: &[f64]) -> Result<RuleEval> {
    if v.len() != rules.dim() {
        return Err(Error::Domain(format!(
            "storage vector has {} entries, rules expect {}",
            v.len(),
            rules.dim()
        )));
    }
    let (k, fallback) =
        locate(&rules.regions, v).ok_or_else(|| Error::Domain("rules contain no region".into()))?;
    if fallback {
        warn!(
            "no region contains {v:?}; using nearest region {}",
            rules.regions[k].id
        );
    }
    Ok(RuleEval {
        region: rules.regions[k].id,
        f_mwh: rules.future_value(k, v),
        fallback,
    })
}

/// Columns and rows the rules add to a host model.
#[derive(Clone, Debug)]
pub struct RulesEmbedding {
    /// One indicator per region, in region order.
    pub z: Vec<VarId>,
    /// `F(V^cs)` as a linear expression in host variables.
    pub future_value: LinExpr<f64>,
    /// Big-M used per region and inequality.
    pub big_m: Vec<Vec<f64>>,
}

/// Tightest valid big-M of `e'V + f ≤ M(1 − Z)` over the box.
fn interval_bound(h: &Halfspace<f64>, lo: &[f64], hi: &[f64]) -> f64 {
    h.e.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&e, (&l, &u))| (e * l).max(e * u))
        .sum::<f64>()
        + h.f
}

/// Appends the rules to `mb`, with `vcs[n]` the host expression of carryover
/// storage; `big_m` overrides the auto-sized constants and must dominate them.
pub fn emit_milp_constraints(
    rules: &ValuationRules,
    mb: &mut ModelBuilder<f64>,
    vcs: &[LinExpr<f64>],
    big_m: Option<f64>,
    tag: &str,
) -> Result<RulesEmbedding> {
    rules.validate()?;
    let n = rules.dim();
    if vcs.len() != n {
        return Err(Error::Domain(format!(
            "{} storage expressions for {n} reservoirs",
            vcs.len()
        )));
    }
    let lo = &rules.v_min;
    let hi = &rules.v_max;
    if hi.len() != n {
        return Err(Error::Domain("rules need v_max to size big-M".into()));
    }
    let z: Vec<VarId> = rules
        .regions
        .iter()
        .map(|r| mb.binary(format!("region[{tag},{}]", r.id)))
        .collect();
    let mut one = LinExpr::new();
    for &zr in &z {
        one.add(zr, 1.0);
    }
    mb.eq(
        &one,
        &LinExpr::constant(1.0),
        format!("region-choice[{tag}]"),
    );

    let mut ms = Vec::with_capacity(rules.regions.len());
    for (r, &zr) in rules.regions.iter().zip(&z) {
        let mut row_m = Vec::with_capacity(r.ineqs.len());
        for (o, h) in r.ineqs.iter().enumerate() {
            let need = interval_bound(h, lo, hi);
            let m = match big_m {
                Some(m) if m + 1e-12 < need => {
                    return Err(Error::Domain(format!(
                        "big-M {m} below the bound {need} of region {} row {o}",
                        r.id
                    )))
                }
                Some(m) => m,
                None => need,
            };
            row_m.push(m);
            if need <= 0.0 {
                continue;
            }
            // e'V + f ≤ M(1 − Z)
            let mut lhs = LinExpr::new();
            for (k, &e) in h.e.iter().enumerate() {
                lhs.add_expr(&vcs[k], e);
            }
            lhs.add(zr, m);
            mb.le(
                &lhs,
                &LinExpr::constant(m - h.f),
                format!("region-row[{tag},{},{o}]", r.id),
            );
        }
        ms.push(row_m);
    }

    // F = Σ_r Σ_n π_rn·Z_r·(V_n − v_min_n), with Z_r·(V_n − lo_n) linearized
    let mut f = LinExpr::new();
    for (r, &zr) in rules.regions.iter().zip(&z) {
        for k in 0..n {
            if r.pi[k] == 0.0 {
                continue;
            }
            let mut u = vcs[k].clone();
            u.add_constant(-lo[k]);
            let w = linearize_product(mb, zr, &u, hi[k] - lo[k], &format!("{tag},{},{k}", r.id))?;
            f.add(w, r.pi[k]);
        }
    }
    Ok(RulesEmbedding {
        z,
        future_value: f,
        big_m: ms,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub theta: Vec<f64>,
    pub region: usize,
    pub f_mwh: f64,
}

/// Columns `theta_1..theta_N, region_id, F_mwh`.
pub fn write_surface_csv<W: Write>(points: &[SurfacePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = points.first().map_or(0, |p| p.theta.len());
    let mut header: Vec<String> = (1..=n).map(|k| format!("theta_{k}")).collect();
    header.push("region_id".into());
    header.push("F_mwh".into());
    w.write_record(&header)?;
    for p in points {
        let mut rec: Vec<String> = p.theta.iter().map(|v| v.to_string()).collect();
        rec.push(p.region.to_string());
        rec.push(p.f_mwh.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("surface csv", e))?;
    Ok(())
}

/// Region value pieces agree with `J` at the region centers (sanity helper
/// used by self-checks).
pub fn piece_at(set: &RegionSet, theta: &[f64]) -> Option<f64> {
    set.locate(theta).map(|(k, _)| {
        let r = &set.regions[k];
        dot(&r.value.a, theta) + r.value.g
    })
}
