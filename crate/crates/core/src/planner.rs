//! Current-period planning: the chance-constrained model with the valuation
//! rules embedded, its error-free variant, and the short-term evaluator that
//! scores a carryover target against realized inflows.

use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{gmm_quantile, project_affine, GmmForecast};
use crate::future::UnitDispatch;
use crate::mp::{emit_milp_constraints, evaluate_rules, RulesEmbedding, ValuationRules};
use crate::solver::{solve_milp, LinExpr, MilpSolution, ModelBuilder, VarId};
use crate::system::{validate_system, CascadeSystem, ALPHA, LAMBDA};
use crate::units::{add_unit, UnitVars};
use crate::Milp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanMode {
    Ccp,
    Det,
}

impl FromStr for PlanMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ccp" => Ok(Self::Ccp),
            "det" => Ok(Self::Det),
            other => Err(format!("unknown mode `{other}` (expected ccp or det)")),
        }
    }
}

/// `ε_t`: 0.010, 0.015, 0.020, 0.025, then +0.005 per week up to 0.05.
pub fn default_epsilon(t: usize) -> Vec<f64> {
    (1..=t)
        .map(|w| (0.010 + 0.005 * (w - 1) as f64).min(0.05))
        .collect()
}

#[derive(Clone, Debug)]
pub struct PlanningProblem {
    pub system: CascadeSystem,
    pub t: usize,
    /// Storage at the start of week 1, Mm³.
    pub initial: Vec<f64>,
    /// Current-period forecast; weeks beyond `t` are ignored.
    pub forecast: GmmForecast<f64>,
    pub rules: ValuationRules,
    pub epsilon: Vec<f64>,
    pub mode: PlanMode,
    /// Error-free weekly inflow `[n][week]` for DET; forecast means if `None`.
    pub det_inflow: Option<Vec<Vec<f64>>>,
    pub big_m: Option<f64>,
}

impl PlanningProblem {
    pub fn new(
        system: CascadeSystem,
        t: usize,
        initial: Vec<f64>,
        forecast: GmmForecast<f64>,
        rules: ValuationRules,
        mode: PlanMode,
    ) -> Self {
        Self {
            system,
            epsilon: default_epsilon(t),
            t,
            initial,
            forecast,
            rules,
            mode,
            det_inflow: None,
            big_m: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = validate_system(&self.system);
        if !v.is_empty() {
            return Err(Error::Invalid(v));
        }
        let n = self.system.len();
        if self.t < 1 {
            return Err(Error::Domain("current period needs T ≥ 1".into()));
        }
        if self.initial.len() != n {
            return Err(Error::Domain(format!(
                "{} initial storages for {n} reservoirs",
                self.initial.len()
            )));
        }
        if self.epsilon.len() < self.t
            || self.epsilon[..self.t]
                .iter()
                .any(|&e| !(e > 0.0 && e < 1.0))
        {
            return Err(Error::Domain(
                "need ε_t ∈ (0, 1) for every current-period week".into(),
            ));
        }
        if self.forecast.reservoirs.len() != n || self.forecast.horizon() < self.t {
            return Err(Error::Domain(format!(
                "forecast must cover {n} reservoirs and {} weeks",
                self.t
            )));
        }
        self.forecast.validate()?;
        if let Some(w) = &self.det_inflow {
            if w.len() != n
                || w.iter()
                    .any(|r| r.len() < self.t || r.iter().any(|&x| !(x >= 0.0)))
            {
                return Err(Error::Domain(
                    "error-free inflow must be ≥ 0 and cover every week".into(),
                ));
            }
        }
        if self.rules.dim() != n {
            return Err(Error::Domain(
                "rules were built for a different number of reservoirs".into(),
            ));
        }
        Ok(())
    }

    /// Inflow used by the storage recursion: DET vector or forecast means.
    pub fn mean_inflow(&self) -> Vec<Vec<f64>> {
        match (&self.det_inflow, self.mode) {
            (Some(w), PlanMode::Det) => w.iter().map(|r| r[..self.t].to_vec()).collect(),
            _ => self
                .forecast
                .reservoirs
                .iter()
                .map(|r| (0..self.t).map(|k| r.mean(k)).collect())
                .collect(),
        }
    }
}

/// Quantiles bounding cumulative inflow of reservoir `n` through week `week`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChanceRow {
    pub n: usize,
    /// 1-based week.
    pub week: usize,
    /// Per-side probability `ε_t / 2N`.
    pub level: f64,
    /// `ρ^{ε/2N}`.
    pub lower_quantile: f64,
    /// `ρ^{1−ε/2N}`.
    pub upper_quantile: f64,
}

/// Deterministic counterparts of the weekly joint chance constraints.
pub fn jcc_to_rows(problem: &PlanningProblem) -> Result<Vec<ChanceRow>> {
    let n_res = problem.system.len();
    let h = problem.forecast.horizon();
    let mut rows = Vec::with_capacity(n_res * problem.t);
    for week in 1..=problem.t {
        let level = problem.epsilon[week - 1] / (2 * n_res) as f64;
        for n in 0..n_res {
            let s: Vec<f64> = (0..h).map(|k| if k < week { 1.0 } else { 0.0 }).collect();
            let g = project_affine(&problem.forecast, n, &s)?;
            rows.push(ChanceRow {
                n,
                week,
                level,
                lower_quantile: gmm_quantile(&g, level)?,
                upper_quantile: gmm_quantile(&g, 1.0 - level)?,
            });
        }
    }
    Ok(rows)
}

/// Weekly unit and spill columns shared by the planning and evaluation
/// models.
#[derive(Clone, Debug)]
pub struct WeeklyLayout {
    /// `units[n][week][i]`.
    pub units: Vec<Vec<Vec<UnitVars>>>,
    /// `spill[n][week]`.
    pub spill: Vec<Vec<VarId>>,
    pub upstream: Vec<Vec<usize>>,
    pub delay: usize,
}

impl WeeklyLayout {
    pub fn build(mb: &mut ModelBuilder<f64>, system: &CascadeSystem, t: usize) -> Self {
        let mut units = Vec::with_capacity(system.len());
        let mut spill = Vec::with_capacity(system.len());
        for r in &system.reservoirs {
            let mut per_week = Vec::with_capacity(t);
            let mut s = Vec::with_capacity(t);
            for week in 0..t {
                per_week.push(
                    r.units
                        .iter()
                        .map(|u| add_unit(mb, u, &format!("{},{},{}", r.id, u.id, week + 1)))
                        .collect(),
                );
                s.push(mb.continuous(format!("spill[{},{}]", r.id, week + 1)));
            }
            units.push(per_week);
            spill.push(s);
        }
        Self {
            units,
            spill,
            upstream: system.upstream_indices(),
            delay: system.delay as usize,
        }
    }

    pub fn weeks(&self) -> usize {
        self.spill.first().map_or(0, |s| s.len())
    }

    /// Water leaving reservoir `n` in week `week` (0-based), Mm³.
    pub fn release(&self, n: usize, week: usize) -> LinExpr<f64> {
        let mut e = LinExpr::new();
        for u in &self.units[n][week] {
            e.add_expr(&u.discharge(), ALPHA);
        }
        e.add(self.spill[n][week], 1.0);
        e
    }

    /// Net routed flow `W^Δ`; releases before week 1 count as zero.
    pub fn w_delta(&self, n: usize, week: usize) -> LinExpr<f64> {
        let mut e = self.release(n, week).scaled(-1.0);
        if week >= self.delay {
            for &m in &self.upstream[n] {
                e.add_expr(&self.release(m, week - self.delay), 1.0);
            }
        }
        e
    }

    pub fn energy(&self) -> LinExpr<f64> {
        let mut e = LinExpr::new();
        for res in &self.units {
            for week in res {
                for u in week {
                    e.add_expr(&u.power(), LAMBDA);
                }
            }
        }
        e
    }

    pub fn schedule(
        &self,
        system: &CascadeSystem,
        sol: &MilpSolution<f64>,
        storage: &[Vec<f64>],
    ) -> Vec<PlanWeek> {
        let (x, y) = (&sol.x, &sol.y);
        (0..self.weeks())
            .map(|week| PlanWeek {
                week: week + 1,
                reservoirs: system
                    .reservoirs
                    .iter()
                    .enumerate()
                    .map(|(n, r)| ReservoirWeek {
                        id: r.id.clone(),
                        units: self.units[n][week]
                            .iter()
                            .map(|u| {
                                let (discharge, on, power) = u.values(x, y);
                                UnitDispatch {
                                    discharge,
                                    on,
                                    power,
                                }
                            })
                            .collect(),
                        spill: self.spill[n][week].value(x, y),
                        w_delta: self.w_delta(n, week).eval(x, y, &[]),
                        storage_end: storage[n][week + 1],
                    })
                    .collect(),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReservoirWeek {
    pub id: String,
    pub units: Vec<UnitDispatch>,
    pub spill: f64,
    pub w_delta: f64,
    /// Planned (expected) or realized storage at the end of the week.
    pub storage_end: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanWeek {
    pub week: usize,
    pub reservoirs: Vec<ReservoirWeek>,
}

fn storage_path(initial: &[f64], inflow: &[Vec<f64>], schedule_wd: &[Vec<f64>]) -> Vec<Vec<f64>> {
    initial
        .iter()
        .enumerate()
        .map(|(n, &v0)| {
            let mut v = vec![v0];
            for (w, wd) in inflow[n].iter().zip(&schedule_wd[n]) {
                let last = *v.last().unwrap();
                v.push(last + w + wd);
            }
            v
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct PlanModel {
    pub milp: Milp,
    pub weekly: WeeklyLayout,
    pub vcs: Vec<LinExpr<f64>>,
    pub embedding: RulesEmbedding,
    pub chance_rows: Vec<ChanceRow>,
}

/// Scheduling rows over the current period plus the embedded rules; no free
/// parameters.
pub fn build_plan_milp(problem: &PlanningProblem) -> Result<PlanModel> {
    problem.validate()?;
    let sys = &problem.system;
    let t = problem.t;
    let mut mb = ModelBuilder::new(0);
    let weekly = WeeklyLayout::build(&mut mb, sys, t);
    let mean = problem.mean_inflow();
    let chance_rows = match problem.mode {
        PlanMode::Ccp => jcc_to_rows(problem)?,
        PlanMode::Det => Vec::new(),
    };

    let mut vcs = Vec::with_capacity(sys.len());
    for (n, r) in sys.reservoirs.iter().enumerate() {
        // routed flow accumulated through each week
        let mut routed = LinExpr::new();
        let mut inflow = 0.0;
        for week in 0..t {
            routed.add_expr(&weekly.w_delta(n, week), 1.0);
            inflow += mean[n][week];
            match problem.mode {
                PlanMode::Det => {
                    let mut v = routed.clone();
                    v.add_constant(problem.initial[n] + inflow);
                    mb.le(
                        &LinExpr::constant(r.v_min),
                        &v,
                        format!("storage-lower[{},{}]", r.id, week + 1),
                    );
                    mb.le(
                        &v,
                        &LinExpr::constant(r.v_max),
                        format!("storage-upper[{},{}]", r.id, week + 1),
                    );
                }
                PlanMode::Ccp => {
                    let row = chance_rows
                        .iter()
                        .find(|c| c.n == n && c.week == week + 1)
                        .expect("one chance row per reservoir and week");
                    let mut hi = routed.clone();
                    hi.add_constant(problem.initial[n] + row.upper_quantile);
                    mb.le(
                        &hi,
                        &LinExpr::constant(r.v_max),
                        format!("chance-upper[{},{}]", r.id, week + 1),
                    );
                    let mut lo = routed.clone();
                    lo.add_constant(problem.initial[n] + row.lower_quantile);
                    mb.le(
                        &LinExpr::constant(r.v_min),
                        &lo,
                        format!("chance-lower[{},{}]", r.id, week + 1),
                    );
                }
            }
        }
        let mut v = routed;
        v.add_constant(problem.initial[n] + inflow);
        mb.le(
            &LinExpr::constant(r.v_min),
            &v,
            format!("target-lower[{}]", r.id),
        );
        mb.le(
            &v,
            &LinExpr::constant(r.v_max),
            format!("target-upper[{}]", r.id),
        );
        vcs.push(v);
    }

    let embedding = emit_milp_constraints(&problem.rules, &mut mb, &vcs, problem.big_m, "F")?;
    mb.add_objective_expr(&weekly.energy());
    mb.add_objective_expr(&embedding.future_value);
    Ok(PlanModel {
        milp: mb.build(),
        weekly,
        vcs,
        embedding,
        chance_rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub mode: PlanMode,
    /// Carryover target `V^cs`, Mm³.
    pub targets: Vec<f64>,
    pub immediate_mwh: f64,
    /// `F(V^cs)` from the rules.
    pub future_mwh: f64,
    /// `F` as valued inside the optimization (differs only on region ties).
    pub embedded_future_mwh: f64,
    pub region_id: usize,
    pub objective: f64,
    pub schedule: Vec<PlanWeek>,
}

impl PlanResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    /// `w_delta[n][week]` of the planned schedule.
    pub fn w_delta(&self) -> Vec<Vec<f64>> {
        let n = self.targets.len();
        (0..n)
            .map(|k| {
                self.schedule
                    .iter()
                    .map(|w| w.reservoirs[k].w_delta)
                    .collect()
            })
            .collect()
    }
}

/// Rows `week,reservoir,unit,discharge,on,power,spill,storage_end`; reservoir
/// rows without a unit carry spill and storage.
pub fn write_schedule_csv<W: Write>(schedule: &[PlanWeek], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "week",
        "reservoir",
        "unit",
        "discharge",
        "on",
        "power",
        "spill",
        "storage_end",
    ])?;
    for week in schedule {
        for r in &week.reservoirs {
            for (i, u) in r.units.iter().enumerate() {
                w.write_record([
                    week.week.to_string(),
                    r.id.clone(),
                    (i + 1).to_string(),
                    u.discharge.to_string(),
                    u.on.to_string(),
                    u.power.to_string(),
                    String::new(),
                    String::new(),
                ])?;
            }
            w.write_record([
                week.week.to_string(),
                r.id.clone(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                r.spill.to_string(),
                r.storage_end.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("schedule csv", e))?;
    Ok(())
}

fn infeasible_tags(problem: &PlanningProblem, rows: &[ChanceRow]) -> Vec<String> {
    let sys = &problem.system;
    rows.iter()
        .filter(|c| {
            let r = &sys.reservoirs[c.n];
            c.upper_quantile - c.lower_quantile > r.v_max - r.v_min
        })
        .map(|c| format!("chance[{},{}]", sys.reservoirs[c.n].id, c.week))
        .collect()
}

pub fn solve_plan(problem: &PlanningProblem) -> Result<PlanResult> {
    let model = build_plan_milp(problem)?;
    let sol = solve_milp(&model.milp, &[], &[])?;
    if !sol.is_optimal() {
        let tags = infeasible_tags(problem, &model.chance_rows);
        let detail = if tags.is_empty() {
            "no schedule keeps storage inside its bounds".to_string()
        } else {
            format!(
                "inflow uncertainty exceeds the storage band at {}",
                tags.join(", ")
            )
        };
        return Err(Error::Infeasible(format!(
            "plan {:?}: {detail}",
            sol.status
        )));
    }
    let (x, y) = (&sol.x, &sol.y);
    let targets: Vec<f64> = model.vcs.iter().map(|v| v.eval(x, y, &[])).collect();
    let immediate = model.weekly.energy().eval(x, y, &[]);
    let embedded = model.embedding.future_value.eval(x, y, &[]);
    let chosen = model
        .embedding
        .z
        .iter()
        .position(|z| z.value(x, y) > 0.5)
        .ok_or_else(|| Error::Numeric("no region indicator set".into()))?;
    let region = &problem.rules.regions[chosen];
    if !region.contains(&targets, 1e-6) {
        return Err(Error::Numeric(format!(
            "selected region {} does not contain the target",
            region.id
        )));
    }
    let eval = evaluate_rules(&problem.rules, &targets)?;
    let wd: Vec<Vec<f64>> = (0..problem.system.len())
        .map(|n| {
            (0..problem.t)
                .map(|w| model.weekly.w_delta(n, w).eval(x, y, &[]))
                .collect()
        })
        .collect();
    let storage = storage_path(&problem.initial, &problem.mean_inflow(), &wd);
    Ok(PlanResult {
        mode: problem.mode,
        targets,
        immediate_mwh: immediate,
        future_mwh: eval.f_mwh,
        embedded_future_mwh: embedded,
        region_id: region.id,
        objective: sol.objective,
        schedule: model.weekly.schedule(&problem.system, &sol, &storage),
    })
}

/// Monte-Carlo frequency, per week, of any reservoir leaving its storage box
/// under the planned routing.
pub fn chance_violation_rates(
    problem: &PlanningProblem,
    plan: &PlanResult,
    draws: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let factors = problem.forecast.factors()?;
    let wd = plan.w_delta();
    let sys = &problem.system;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = vec![0usize; problem.t];
    for _ in 0..draws {
        let path = problem.forecast.sample_path(&mut rng, &factors);
        let mut week_bad = vec![false; problem.t];
        for (n, r) in sys.reservoirs.iter().enumerate() {
            let mut v = problem.initial[n];
            for week in 0..problem.t {
                v += path[n][week] + wd[n][week];
                if v < r.v_min - 1e-9 || v > r.v_max + 1e-9 {
                    week_bad[week] = true;
                }
            }
        }
        for (b, &w) in bad.iter_mut().zip(&week_bad) {
            *b += w as usize;
        }
    }
    Ok(bad
        .iter()
        .map(|&b| b as f64 / draws.max(1) as f64)
        .collect())
}

// --------------------------------------------------------- short-term check

/// Symmetric target-deviation penalty: ten times the largest LMWV.
pub fn slack_penalty(rules: &ValuationRules) -> f64 {
    let m = rules
        .regions
        .iter()
        .flat_map(|r| r.pi.iter())
        .fold(0.0f64, |a, p| a.max(p.abs()));
    10.0 * m.max(1.0)
}

#[derive(Clone, Debug)]
pub struct ShortTermModel {
    pub milp: Milp,
    pub weekly: WeeklyLayout,
    pub slack_up: Vec<VarId>,
    pub slack_down: Vec<VarId>,
    pub inflow: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShortTermResult {
    pub benefit_mwh: f64,
    /// Realized end storage minus target, Mm³.
    pub slack: Vec<f64>,
    pub end_storage: Vec<f64>,
    pub schedule: Vec<PlanWeek>,
}

/// Weekly model under realized inflow `[n][week]` with the end storage tied
/// to `target` through a penalized slack.
pub fn build_short_term_eval(
    system: &CascadeSystem,
    realized: &[Vec<f64>],
    initial: &[f64],
    target: &[f64],
    t: usize,
    penalty: f64,
) -> Result<ShortTermModel> {
    let v = validate_system(system);
    if !v.is_empty() {
        return Err(Error::Invalid(v));
    }
    let n_res = system.len();
    if realized.len() != n_res
        || realized
            .iter()
            .any(|r| r.len() != t || r.iter().any(|&w| !(w >= 0.0)))
    {
        return Err(Error::Domain(format!(
            "realized inflow must be ≥ 0 and {n_res} × {t}"
        )));
    }
    if initial.len() != n_res || target.len() != n_res {
        return Err(Error::Domain(
            "initial storage and target need one entry per reservoir".into(),
        ));
    }
    let mut mb = ModelBuilder::new(0);
    let weekly = WeeklyLayout::build(&mut mb, system, t);
    let mut slack_up = Vec::with_capacity(n_res);
    let mut slack_down = Vec::with_capacity(n_res);
    for (n, r) in system.reservoirs.iter().enumerate() {
        let mut v = LinExpr::constant(initial[n]);
        for week in 0..t {
            v.add_constant(realized[n][week]);
            v.add_expr(&weekly.w_delta(n, week), 1.0);
            let lo = r.v_min.min(initial[n]);
            mb.le(
                &LinExpr::constant(lo),
                &v,
                format!("storage-lower[{},{}]", r.id, week + 1),
            );
            mb.le(
                &v,
                &LinExpr::constant(r.v_max),
                format!("storage-upper[{},{}]", r.id, week + 1),
            );
        }
        let up = mb.continuous(format!("target-over[{}]", r.id));
        let down = mb.continuous(format!("target-under[{}]", r.id));
        let span = r.v_max - r.v_min.min(initial[n]) + 1.0;
        mb.le(
            &LinExpr::var(up, 1.0),
            &LinExpr::constant(span),
            format!("slack-cap-over[{}]", r.id),
        );
        mb.le(
            &LinExpr::var(down, 1.0),
            &LinExpr::constant(span),
            format!("slack-cap-under[{}]", r.id),
        );
        // V_{T+1} − s⁺ + s⁻ = target
        let mut lhs = v;
        lhs.add(up, -1.0);
        lhs.add(down, 1.0);
        mb.eq(
            &lhs,
            &LinExpr::constant(target[n]),
            format!("target[{}]", r.id),
        );
        mb.add_objective(up, -penalty);
        mb.add_objective(down, -penalty);
        slack_up.push(up);
        slack_down.push(down);
    }
    mb.add_objective_expr(&weekly.energy());
    Ok(ShortTermModel {
        milp: mb.build(),
        weekly,
        slack_up,
        slack_down,
        inflow: realized.to_vec(),
        initial: initial.to_vec(),
    })
}

impl ShortTermModel {
    pub fn solve(&self, system: &CascadeSystem) -> Result<ShortTermResult> {
        let sol = solve_milp(&self.milp, &[], &[])?;
        if !sol.is_optimal() {
            return Err(Error::Infeasible(format!(
                "short-term evaluation {:?}",
                sol.status
            )));
        }
        let (x, y) = (&sol.x, &sol.y);
        let n_res = system.len();
        let t = self.weekly.weeks();
        let wd: Vec<Vec<f64>> = (0..n_res)
            .map(|n| {
                (0..t)
                    .map(|w| self.weekly.w_delta(n, w).eval(x, y, &[]))
                    .collect()
            })
            .collect();
        let storage = storage_path(&self.initial, &self.inflow, &wd);
        Ok(ShortTermResult {
            benefit_mwh: self.weekly.energy().eval(x, y, &[]),
            slack: (0..n_res)
                .map(|n| self.slack_up[n].value(x, y) - self.slack_down[n].value(x, y))
                .collect(),
            end_storage: storage.iter().map(|s| s[t]).collect(),
            schedule: self.weekly.schedule(system, &sol, &storage),
        })
    }
}

/// Builds and solves the short-term evaluation in one step.
pub fn evaluate_target(
    system: &CascadeSystem,
    realized: &[Vec<f64>],
    initial: &[f64],
    target: &[f64],
    penalty: f64,
) -> Result<ShortTermResult> {
    let t = realized.first().map_or(0, |r| r.len());
    build_short_term_eval(system, realized, initial, target, t, penalty)?.solve(system)
}
