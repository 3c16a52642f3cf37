//! Future-period models: the aggregated two-phase MILP in compact parametric
//! form (`θ` = carryover storage) and the weekly full model used to measure
//! the aggregation gap.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{expected_future_inflow, expected_weekly_inflow, GmmForecast};
use crate::solver::{solve_milp, LinExpr, MilpSolution, ModelBuilder, VarId};
use crate::system::{CascadeSystem, ALPHA, LAMBDA};
use crate::units::{add_unit, power_cap, UnitVars};
use crate::Milp;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FutureModelConfig {
    /// Future-period length L, weeks.
    pub l: usize,
    /// Binary-expansion resolution ω.
    pub omega: f64,
    /// Relative exploration threshold ϱ used by the partitioner.
    pub rho_rel: f64,
    /// Adds spill terms to the phase-switch storage checks.
    pub spill_in_checks: bool,
    /// Multiplier on the auto-sized big-M constants; must be ≥ 1.
    pub big_m_scale: f64,
    /// Adds valid inequalities tying the linearized products together.
    pub product_cuts: bool,
}

impl Default for FutureModelConfig {
    fn default() -> Self {
        Self {
            l: 4,
            omega: 0.75,
            rho_rel: 1e-6,
            spill_in_checks: false,
            big_m_scale: 1.0,
            product_cuts: true,
        }
    }
}

impl FutureModelConfig {
    pub fn with_l(l: usize) -> Self {
        Self {
            l,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 1 {
            return Err(Error::Domain("future period needs L ≥ 1".into()));
        }
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return Err(Error::Domain(format!("ω = {} outside (0, 1)", self.omega)));
        }
        if !(self.big_m_scale >= 1.0) || !self.big_m_scale.is_finite() {
            return Err(Error::Domain(format!(
                "big-M scale {} would leave big-M below the bound it must dominate",
                self.big_m_scale
            )));
        }
        if !(self.rho_rel > 0.0) {
            return Err(Error::Domain(
                "exploration threshold must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `L_dis = g·Σ_d 2^{d−1}·bit_d` with `g = L(1−ω)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryExpansion {
    pub bits: usize,
    pub granularity: f64,
    pub l: f64,
}

impl BinaryExpansion {
    pub fn weight(&self, d: usize) -> f64 {
        self.granularity * (1u64 << d) as f64
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.bits).map(|d| self.weight(d)).collect()
    }

    /// Largest encodable value before the `L_dis ≤ L` cap.
    pub fn max_raw(&self) -> f64 {
        self.weights().iter().sum()
    }

    pub fn value(&self, bits: &[f64]) -> f64 {
        bits.iter()
            .enumerate()
            .map(|(d, &b)| self.weight(d) * b)
            .sum()
    }

    pub fn expr(&self, vars: &[VarId]) -> LinExpr<f64> {
        let mut e = LinExpr::new();
        for (d, &v) in vars.iter().enumerate() {
            e.add(v, self.weight(d));
        }
        e
    }

    /// Row `L_dis ≤ L`, needed whenever the bits can overshoot.
    pub fn cap_row(&self, vars: &[VarId]) -> Option<(LinExpr<f64>, LinExpr<f64>)> {
        (self.max_raw() > self.l * (1.0 + 1e-12))
            .then(|| (self.expr(vars), LinExpr::constant(self.l)))
    }
}

pub fn binary_expansion_terms(l: usize, omega: f64) -> Result<BinaryExpansion> {
    if !(omega > 0.0 && omega < 1.0) {
        return Err(Error::Domain(format!("ω = {omega} outside (0, 1)")));
    }
    let bits = ((1.0 / (1.0 - omega)).log2() + 1e-12).floor() as usize + 1;
    Ok(BinaryExpansion {
        bits,
        granularity: l as f64 * (1.0 - omega),
        l: l as f64,
    })
}

/// New variable `w = b·z` for a binary `b` and `0 ≤ z ≤ z_max`.
pub fn linearize_product(
    mb: &mut ModelBuilder<f64>,
    b: VarId,
    z: &LinExpr<f64>,
    z_max: f64,
    tag: &str,
) -> Result<VarId> {
    if !z_max.is_finite() || z_max < 0.0 {
        return Err(Error::Domain(format!(
            "product {tag}: factor bound {z_max} is not finite"
        )));
    }
    let w = mb.continuous(format!("w[{tag}]"));
    let wv = LinExpr::var(w, 1.0);
    mb.le(&wv, &LinExpr::var(b, z_max), format!("prod-on[{tag}]"));
    mb.le(&wv, z, format!("prod-cap[{tag}]"));
    // z − w ≤ z_max·(1 − b)
    let mut lhs = z.minus(&wv);
    lhs.add(b, z_max);
    mb.le(
        &lhs,
        &LinExpr::constant(z_max),
        format!("prod-floor[{tag}]"),
    );
    Ok(w)
}

#[derive(Clone, Debug)]
pub struct FutureLayout {
    pub expansion: BinaryExpansion,
    pub bits: Vec<Vec<VarId>>,
    pub units: Vec<Vec<UnitVars>>,
    pub spill: Vec<VarId>,
    /// `b_{n,d}·ΣP_n`.
    pub w_power: Vec<Vec<VarId>>,
    /// `(v, m) → b_{v,d}·Q_m` with `Q_m = αΣD_m`.
    pub w_flow: BTreeMap<(usize, usize), Vec<VarId>>,
    /// `(v, m) → (G, z)`, `G = max(0, L_dis_m·Q_m − L_dis_v·Q_m)`.
    pub gaps: BTreeMap<(usize, usize), (VarId, VarId)>,
    pub upstream: Vec<Vec<usize>>,
}

impl FutureLayout {
    /// `L_dis_v·Q_m`, Mm³.
    pub fn lq(&self, v: usize, m: usize) -> LinExpr<f64> {
        let mut e = LinExpr::new();
        for (d, &w) in self.w_flow[&(v, m)].iter().enumerate() {
            e.add(w, self.expansion.weight(d));
        }
        e
    }

    pub fn l_dis(&self, n: usize) -> LinExpr<f64> {
        self.expansion.expr(&self.bits[n])
    }

    pub fn release_rate(&self, n: usize) -> LinExpr<f64> {
        let mut q = LinExpr::new();
        for u in &self.units[n] {
            q.add_expr(&u.discharge(), ALPHA);
        }
        q
    }

    pub fn total_power(&self, n: usize) -> LinExpr<f64> {
        let mut p = LinExpr::new();
        for u in &self.units[n] {
            p.add_expr(&u.power(), 1.0);
        }
        p
    }
}

/// Aggregated model together with the variable map needed to read solutions.
#[derive(Clone, Debug)]
pub struct FutureModel {
    pub milp: Milp,
    pub layout: FutureLayout,
    pub inflow: Vec<f64>,
    pub config: FutureModelConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitDispatch {
    pub discharge: f64,
    pub on: f64,
    pub power: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FutureSolution {
    pub l_dis: Vec<f64>,
    pub l_ndis: Vec<f64>,
    pub units: Vec<Vec<UnitDispatch>>,
    pub spill: Vec<f64>,
    pub w_delta: Vec<f64>,
    pub objective: f64,
}

fn reservoir_flow_cap(system: &CascadeSystem, n: usize) -> f64 {
    ALPHA * system.reservoirs[n].max_discharge()
}

fn reservoir_power_cap(system: &CascadeSystem, n: usize) -> f64 {
    system.reservoirs[n].units.iter().map(power_cap).sum()
}

fn best_ratio(system: &CascadeSystem, n: usize) -> f64 {
    system.reservoirs[n]
        .units
        .iter()
        .map(|u| u.operating_curve().max_ratio())
        .fold(0.0, f64::max)
}

fn checked(system: &CascadeSystem) -> Result<()> {
    let v = crate::system::validate_system(system);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(v))
    }
}

/// Aggregated future-period MILP with `θ` the carryover storage vector.
pub fn build_future_milp(
    system: &CascadeSystem,
    inflow: &[f64],
    config: &FutureModelConfig,
) -> Result<FutureModel> {
    checked(system)?;
    config.validate()?;
    let n_res = system.len();
    if inflow.len() != n_res {
        return Err(Error::Domain(format!(
            "{} future inflows for {n_res} reservoirs",
            inflow.len()
        )));
    }
    if inflow.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::Domain("future inflow must be ≥ 0".into()));
    }
    let l = config.l as f64;
    let exp = binary_expansion_terms(config.l, config.omega)?;
    let ups = system.upstream_indices();
    let ids: Vec<&str> = system.reservoirs.iter().map(|r| r.id.as_str()).collect();
    let scale = config.big_m_scale;
    let mut mb = ModelBuilder::new(n_res);

    let mut bits = Vec::with_capacity(n_res);
    let mut units = Vec::with_capacity(n_res);
    for (n, r) in system.reservoirs.iter().enumerate() {
        let b: Vec<VarId> = (0..exp.bits)
            .map(|d| mb.binary(format!("bit[{},{}]", ids[n], d + 1)))
            .collect();
        if let Some((lhs, rhs)) = exp.cap_row(&b) {
            mb.le(&lhs, &rhs, format!("phase-length[{}]", ids[n]));
        }
        bits.push(b);
        units.push(
            r.units
                .iter()
                .map(|u| add_unit(&mut mb, u, &format!("{},{}", ids[n], u.id)))
                .collect(),
        );
    }
    let spill: Vec<VarId> = ids
        .iter()
        .map(|id| mb.continuous(format!("spill[{id}]")))
        .collect();
    let mut layout = FutureLayout {
        expansion: exp.clone(),
        bits,
        units,
        spill,
        w_power: Vec::new(),
        w_flow: BTreeMap::new(),
        gaps: BTreeMap::new(),
        upstream: ups.clone(),
    };

    // ordered pairs (v, m) whose gap G_vm enters a phase check
    let mut pairs = BTreeSet::new();
    for n in 0..n_res {
        let group: Vec<usize> = std::iter::once(n).chain(ups[n].iter().copied()).collect();
        for &v in &group {
            for &m in &ups[n] {
                if v != m {
                    pairs.insert((v, m));
                }
            }
            if v != n {
                pairs.insert((v, n));
            }
        }
    }
    let mut flow_products: BTreeSet<(usize, usize)> = (0..n_res).map(|m| (m, m)).collect();
    flow_products.extend(pairs.iter().copied());

    for n in 0..n_res {
        let p = layout.total_power(n);
        let zmax = scale * reservoir_power_cap(system, n);
        let mut ws = Vec::with_capacity(exp.bits);
        for d in 0..exp.bits {
            ws.push(linearize_product(
                &mut mb,
                layout.bits[n][d],
                &p,
                zmax,
                &format!("P,{},{}", ids[n], d + 1),
            )?);
        }
        layout.w_power.push(ws);
    }
    for &(v, m) in &flow_products {
        let q = layout.release_rate(m);
        let zmax = scale * reservoir_flow_cap(system, m);
        let mut ws = Vec::with_capacity(exp.bits);
        for d in 0..exp.bits {
            ws.push(linearize_product(
                &mut mb,
                layout.bits[v][d],
                &q,
                zmax,
                &format!("Q,{},{},{}", ids[v], ids[m], d + 1),
            )?);
        }
        layout.w_flow.insert((v, m), ws);
    }

    if config.product_cuts {
        for n in 0..n_res {
            let mut lhs = LinExpr::new();
            for (d, &w) in layout.w_power[n].iter().enumerate() {
                lhs.add(w, exp.weight(d));
            }
            mb.le(
                &lhs,
                &layout.total_power(n).scaled(l),
                format!("cut-power[{}]", ids[n]),
            );
            let ratio = best_ratio(system, n) / ALPHA;
            for d in 0..exp.bits {
                let wq = layout.w_flow[&(n, n)][d];
                mb.le(
                    &LinExpr::var(layout.w_power[n][d], 1.0),
                    &LinExpr::var(wq, ratio),
                    format!("cut-efficiency[{},{}]", ids[n], d + 1),
                );
            }
        }
        for &(v, m) in &flow_products {
            mb.le(
                &layout.lq(v, m),
                &layout.release_rate(m).scaled(l),
                format!("cut-flow[{},{}]", ids[v], ids[m]),
            );
        }
    }

    for &(v, m) in &pairs {
        let g = mb.continuous(format!("gap[{},{}]", ids[v], ids[m]));
        let z = mb.binary(format!("gap-on[{},{}]", ids[v], ids[m]));
        let big_m = scale * l * reservoir_flow_cap(system, m);
        let delta = layout.lq(m, m).minus(&layout.lq(v, m));
        let gv = LinExpr::var(g, 1.0);
        let tag = format!("{},{}", ids[v], ids[m]);
        mb.le(&delta, &gv, format!("gap-floor[{tag}]"));
        // G ≤ Δ + M(1 − z)
        let mut rhs = delta.clone();
        rhs.add(z, -big_m);
        rhs.add_constant(big_m);
        mb.le(&gv, &rhs, format!("gap-active[{tag}]"));
        mb.le(&gv, &LinExpr::var(z, big_m), format!("gap-off[{tag}]"));
        layout.gaps.insert((v, m), (g, z));
    }

    // storage checks when each reservoir of the group starts discharging
    for n in 0..n_res {
        let r = &system.reservoirs[n];
        let group: Vec<usize> = std::iter::once(n).chain(ups[n].iter().copied()).collect();
        for &v in &group {
            let mut e = LinExpr::theta(n, 1.0);
            e.add_constant(inflow[n]);
            e.add_expr(&layout.l_dis(v), -inflow[n] / l);
            for &m in &ups[n] {
                if m != v {
                    e.add(layout.gaps[&(v, m)].0, 1.0);
                }
            }
            if v != n {
                e.add(layout.gaps[&(v, n)].0, -1.0);
            }
            if config.spill_in_checks {
                for &m in &ups[n] {
                    e.add(layout.spill[m], 1.0);
                }
                e.add(layout.spill[n], -1.0);
            }
            let tag = format!("{},{}", ids[n], ids[v]);
            mb.le(
                &e,
                &LinExpr::constant(r.v_max),
                format!("phase-check-upper[{tag}]"),
            );
            mb.le(
                &LinExpr::constant(r.v_min),
                &e,
                format!("phase-check-lower[{tag}]"),
            );
        }
    }

    // end-of-period storage
    for n in 0..n_res {
        let r = &system.reservoirs[n];
        let mut e = LinExpr::theta(n, 1.0);
        e.add_constant(inflow[n]);
        for &m in &ups[n] {
            e.add_expr(&layout.lq(m, m), 1.0);
            e.add(layout.spill[m], 1.0);
        }
        e.add_expr(&layout.lq(n, n), -1.0);
        e.add(layout.spill[n], -1.0);
        mb.le(
            &LinExpr::constant(r.v_min),
            &e,
            format!("end-storage-lower[{}]", ids[n]),
        );
        mb.le(
            &e,
            &LinExpr::constant(r.v_max),
            format!("end-storage-upper[{}]", ids[n]),
        );
    }

    for n in 0..n_res {
        for (d, &w) in layout.w_power[n].iter().enumerate() {
            mb.add_objective(w, LAMBDA * exp.weight(d));
        }
        mb.add_objective(layout.spill[n], -system.reservoirs[n].spill_penalty);
    }

    Ok(FutureModel {
        milp: mb.build(),
        layout,
        inflow: inflow.to_vec(),
        config: config.clone(),
    })
}

/// Expected future inflow of every reservoir from a forecast covering the
/// current period (first `t` weeks) and the future period.
pub fn future_inflows(forecast: &GmmForecast<f64>, t: usize, l: usize) -> Vec<f64> {
    (0..forecast.reservoirs.len())
        .map(|n| expected_future_inflow(forecast, n, t, l))
        .collect()
}

impl FutureModel {
    pub fn solution(&self, sol: &MilpSolution<f64>) -> FutureSolution {
        let (x, y) = (&sol.x, &sol.y);
        let lay = &self.layout;
        let n_res = lay.bits.len();
        let l_dis: Vec<f64> = (0..n_res).map(|n| lay.l_dis(n).eval(x, y, &[])).collect();
        let ups = &lay.upstream;
        let lq = |v: usize, m: usize| lay.lq(v, m).eval(x, y, &[]);
        FutureSolution {
            l_ndis: l_dis.iter().map(|d| self.config.l as f64 - d).collect(),
            units: lay
                .units
                .iter()
                .map(|us| {
                    us.iter()
                        .map(|u| {
                            let (discharge, on, power) = u.values(x, y);
                            UnitDispatch {
                                discharge,
                                on,
                                power,
                            }
                        })
                        .collect()
                })
                .collect(),
            spill: lay.spill.iter().map(|s| s.value(x, y)).collect(),
            w_delta: (0..n_res)
                .map(|n| ups[n].iter().map(|&m| lq(m, m)).sum::<f64>() - lq(n, n))
                .collect(),
            l_dis,
            objective: sol.objective,
        }
    }

    pub fn solve(&self, theta: &[f64]) -> Result<(MilpSolution<f64>, FutureSolution)> {
        let sol = solve_milp(&self.milp, theta, &[])?;
        if !sol.is_optimal() {
            return Err(Error::Infeasible(format!(
                "future model at θ = {theta:?}: {:?}",
                sol.status
            )));
        }
        let f = self.solution(&sol);
        Ok((sol, f))
    }
}

// ----------------------------------------------------------------- full model

#[derive(Clone, Debug)]
pub struct FullLayout {
    /// `units[n][l][i]`.
    pub units: Vec<Vec<Vec<UnitVars>>>,
    /// `spill[n][l]`.
    pub spill: Vec<Vec<VarId>>,
}

#[derive(Clone, Debug)]
pub struct FullModel {
    pub milp: Milp,
    pub layout: FullLayout,
}

/// Weekly model over `L` weeks with per-week commitment and storage bounds.
pub fn build_full_model(
    system: &CascadeSystem,
    weekly: &[Vec<f64>],
    l: usize,
) -> Result<FullModel> {
    checked(system)?;
    let n_res = system.len();
    if weekly.len() != n_res || weekly.iter().any(|w| w.len() != l) {
        return Err(Error::Domain(format!(
            "weekly inflow must be {n_res} × {l}"
        )));
    }
    if l < 1 {
        return Err(Error::Domain("full model needs L ≥ 1".into()));
    }
    let ups = system.upstream_indices();
    let delay = system.delay as usize;
    let ids: Vec<&str> = system.reservoirs.iter().map(|r| r.id.as_str()).collect();
    let mut mb = ModelBuilder::new(n_res);
    let mut units = Vec::with_capacity(n_res);
    let mut spill = Vec::with_capacity(n_res);
    for (n, r) in system.reservoirs.iter().enumerate() {
        let mut per_week = Vec::with_capacity(l);
        let mut s = Vec::with_capacity(l);
        for week in 0..l {
            per_week.push(
                r.units
                    .iter()
                    .map(|u| add_unit(&mut mb, u, &format!("{},{},{}", ids[n], u.id, week + 1)))
                    .collect::<Vec<_>>(),
            );
            s.push(mb.continuous(format!("spill[{},{}]", ids[n], week + 1)));
        }
        units.push(per_week);
        spill.push(s);
    }
    let release = |n: usize, week: usize| -> LinExpr<f64> {
        let mut e = LinExpr::new();
        for u in &units[n][week] {
            e.add_expr(&u.discharge(), ALPHA);
        }
        e.add(spill[n][week], 1.0);
        e
    };
    for n in 0..n_res {
        let r = &system.reservoirs[n];
        let mut storage = LinExpr::theta(n, 1.0);
        for week in 0..l {
            storage.add_constant(weekly[n][week]);
            for &m in &ups[n] {
                if week >= delay {
                    storage.add_expr(&release(m, week - delay), 1.0);
                }
            }
            storage.add_expr(&release(n, week), -1.0);
            let (lo, hi) = if week + 1 == l {
                (
                    format!("end-storage-lower[{}]", ids[n]),
                    format!("end-storage-upper[{}]", ids[n]),
                )
            } else {
                (
                    format!("storage-lower[{},{}]", ids[n], week + 1),
                    format!("storage-upper[{},{}]", ids[n], week + 1),
                )
            };
            mb.le(&LinExpr::constant(r.v_min), &storage, lo);
            mb.le(&storage, &LinExpr::constant(r.v_max), hi);
        }
    }
    for n in 0..n_res {
        for week in 0..l {
            for u in &units[n][week] {
                mb.add_objective_expr(&u.power().scaled(LAMBDA));
            }
            mb.add_objective(spill[n][week], -system.reservoirs[n].spill_penalty);
        }
    }
    Ok(FullModel {
        milp: mb.build(),
        layout: FullLayout { units, spill },
    })
}

// ------------------------------------------------------------ aggregation gap

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSample {
    pub theta: Vec<f64>,
    pub obj_agg: f64,
    pub obj_full: f64,
    /// `None` when the full objective is zero.
    pub gap_pct: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub samples: Vec<GapSample>,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub skipped: usize,
}

/// Uniform draws over the storage box.
pub fn sample_box(system: &CascadeSystem, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            system
                .reservoirs
                .iter()
                .map(|r| rng.gen_range(r.v_min..=r.v_max))
                .collect()
        })
        .collect()
}

/// Paired aggregated/full solves at every `θ`; gap in percent of the full
/// objective.
pub fn aggregation_gap(
    system: &CascadeSystem,
    forecast: &GmmForecast<f64>,
    t: usize,
    config: &FutureModelConfig,
    thetas: &[Vec<f64>],
) -> Result<GapStats> {
    let l = config.l;
    if forecast.horizon() < t + l {
        return Err(Error::Domain(format!(
            "forecast covers {} weeks, need {}",
            forecast.horizon(),
            t + l
        )));
    }
    let agg = build_future_milp(system, &future_inflows(forecast, t, l), config)?;
    let weekly: Vec<Vec<f64>> = (0..system.len())
        .map(|n| expected_weekly_inflow(forecast, n, t, l))
        .collect();
    let full = build_full_model(system, &weekly, l)?;
    let mut samples = Vec::with_capacity(thetas.len());
    for theta in thetas {
        let a = solve_milp(&agg.milp, theta, &[])?;
        let f = solve_milp(&full.milp, theta, &[])?;
        if !a.is_optimal() || !f.is_optimal() {
            return Err(Error::Infeasible(format!(
                "gap sample θ = {theta:?} not solvable"
            )));
        }
        let gap_pct =
            (f.objective != 0.0).then(|| (a.objective - f.objective) / f.objective * 100.0);
        samples.push(GapSample {
            theta: theta.clone(),
            obj_agg: a.objective,
            obj_full: f.objective,
            gap_pct,
        });
    }
    let gaps: Vec<f64> = samples.iter().filter_map(|s| s.gap_pct).collect();
    let skipped = samples.len() - gaps.len();
    let (min, max, mean) = if gaps.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (
            gaps.iter().copied().fold(f64::INFINITY, f64::min),
            gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            gaps.iter().sum::<f64>() / gaps.len() as f64,
        )
    };
    Ok(GapStats {
        samples,
        min,
        mean,
        max,
        skipped,
    })
}

/// Columns `theta_1..theta_N, obj_agg, obj_full, gap_pct`.
pub fn write_gap_csv<W: Write>(stats: &GapStats, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = stats.samples.first().map_or(0, |s| s.theta.len());
    let mut header: Vec<String> = (1..=n).map(|k| format!("theta_{k}")).collect();
    header.extend(["obj_agg", "obj_full", "gap_pct"].map(String::from));
    w.write_record(&header)?;
    for s in &stats.samples {
        let mut rec: Vec<String> = s.theta.iter().map(|v| v.to_string()).collect();
        rec.push(s.obj_agg.to_string());
        rec.push(s.obj_full.to_string());
        rec.push(s.gap_pct.map_or_else(String::new, |g| g.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("gap csv", e))?;
    Ok(())
}
