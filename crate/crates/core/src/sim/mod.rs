//! Synthetic cases, rolling-horizon simulation and surface sampling.

mod cases;

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use cases::{generate_case, Case, CaseKind, CASE_CV, EIGHT_LOCAL_INFLOW};

use crate::error::{Error, Result};
use crate::forecast::{
    synthesize_forecast, synthesize_forecast_at, GmmForecast, SeasonProfile, TruthProcess,
};
use crate::future::{build_future_milp, future_inflows, FutureModelConfig};
use crate::mp::{
    evaluate_rules, hash_text, partition_then_extract, uniform_grid, PartitionConfig,
    PartitionStats, RulesMeta, SurfacePoint, ValuationRules,
};
use crate::planner::{
    evaluate_target, slack_penalty, solve_plan, PlanMode, PlanWeek, PlanningProblem,
};
use crate::solver::Polytope;
use crate::system::{validate_system, CascadeSystem, ALPHA, LAMBDA};

/// Future model on weeks `t+1 .. t+L` of `forecast`, partitioned into rules.
pub fn build_rules(
    system: &CascadeSystem,
    forecast: &GmmForecast<f64>,
    t: usize,
    future: &FutureModelConfig,
    partition: &PartitionConfig,
) -> Result<(ValuationRules, PartitionStats)> {
    if forecast.horizon() < t + future.l {
        return Err(Error::Domain(format!(
            "forecast covers {} weeks, need T + L = {}",
            forecast.horizon(),
            t + future.l
        )));
    }
    let inflow = future_inflows(forecast, t, future.l);
    let model = build_future_milp(system, &inflow, future)?;
    let space = Polytope::boxed(&system.v_min(), &system.v_max());
    let (set, stats) = partition_then_extract(&model.milp, &space, None, partition)?;
    let meta = RulesMeta {
        forecast_hash: hash_text(&forecast.to_json(Some(system))),
        l: future.l,
        omega: future.omega,
        reservoirs: system.reservoirs.iter().map(|r| r.id.clone()).collect(),
        dual_degenerate_regions: 0,
        infeasible_regions: stats.infeasible_regions,
    };
    Ok((ValuationRules::new(set, system.v_min(), meta), stats))
}

/// Hydrology regime applied to the truth profile and forecast per cycle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    #[default]
    Normal,
    Wet,
    Dry,
    /// Dry during the first half of the horizon, wet afterwards.
    Transition,
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "normal" => Ok(Self::Normal),
            "wet" => Ok(Self::Wet),
            "dry" => Ok(Self::Dry),
            "transition" => Ok(Self::Transition),
            other => Err(format!("unknown scenario `{other}`")),
        }
    }
}

impl Scenario {
    /// Mean multiplier for absolute week `week` of a `horizon`-week run.
    pub fn scale(self, week: usize, horizon: usize) -> f64 {
        match self {
            Self::Normal => 1.0,
            Self::Wet => 1.2,
            Self::Dry => 0.8,
            Self::Transition if 2 * week < horizon => 0.8,
            Self::Transition => 1.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: usize,
    pub t: usize,
    pub l: usize,
    pub omega: f64,
    pub seed: u64,
    pub scenario: Scenario,
    pub mode: PlanMode,
    /// Forecast mean relative to the truth process.
    pub forecast_bias: f64,
    /// `None` uses the default schedule.
    pub epsilon: Option<Vec<f64>>,
    /// Start-of-run storage; mid-box when `None`.
    pub initial_storage: Option<Vec<f64>>,
    /// Disables partition merging when false.
    pub merge: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 52,
            t: 4,
            l: 4,
            omega: 0.75,
            seed: 1,
            scenario: Scenario::Normal,
            mode: PlanMode::Ccp,
            forecast_bias: 1.0,
            epsilon: None,
            initial_storage: None,
            merge: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t < 1 || self.horizon == 0 || self.horizon % self.t != 0 {
            return Err(Error::Domain(format!(
                "horizon {} must be a positive multiple of T = {}",
                self.horizon, self.t
            )));
        }
        if self.l < 1 {
            return Err(Error::Domain("L must be at least 1".into()));
        }
        if !(self.forecast_bias > 0.0) {
            return Err(Error::Domain("forecast bias must be positive".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        hash_text(&serde_json::to_string(self).expect("config serializes"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub cycle: usize,
    pub start_week: usize,
    pub initial_storage: Vec<f64>,
    /// Planned carryover target.
    pub target: Vec<f64>,
    pub planned_immediate_mwh: f64,
    pub planned_future_mwh: f64,
    pub realized_inflow: Vec<Vec<f64>>,
    /// Realized generation of the short-term evaluation.
    pub immediate_mwh: f64,
    pub end_storage: Vec<f64>,
    /// Rules value of the realized end storage.
    pub end_future_mwh: f64,
    pub slack: Vec<f64>,
    pub region_id: usize,
    pub regions: usize,
    pub partition_wall_time_s: f64,
    /// Total release (α·ΣD + S) per reservoir over the cycle, Mm³.
    pub release: Vec<f64>,
    pub spill: Vec<f64>,
    /// `Σ λ·P` recomputed from the weekly schedule.
    pub schedule_mwh: f64,
    /// Realized weekly dispatch.
    pub schedule: Vec<PlanWeek>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    pub config_hash: String,
    pub config: SimConfig,
    pub cycles: Vec<CycleReport>,
    pub total_immediate_mwh: f64,
    pub total_planned_mwh: f64,
    pub final_storage: Vec<f64>,
    pub final_future_mwh: f64,
}

impl SimReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per cycle; the first line carries seed and config hash.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# seed={} config={}", self.seed, self.config_hash)
            .map_err(|e| Error::io("report csv", e))?;
        let mut w = csv::Writer::from_writer(out);
        let n = self.final_storage.len();
        let mut header = vec![
            "cycle".to_string(),
            "start_week".into(),
            "immediate_mwh".into(),
            "planned_immediate_mwh".into(),
            "planned_future_mwh".into(),
            "end_future_mwh".into(),
            "region_id".into(),
            "regions".into(),
            "partition_s".into(),
        ];
        for k in 1..=n {
            header.push(format!("target_{k}"));
        }
        for k in 1..=n {
            header.push(format!("end_storage_{k}"));
        }
        for k in 1..=n {
            header.push(format!("slack_{k}"));
        }
        w.write_record(&header)?;
        for c in &self.cycles {
            let mut rec = vec![
                c.cycle.to_string(),
                c.start_week.to_string(),
                c.immediate_mwh.to_string(),
                c.planned_immediate_mwh.to_string(),
                c.planned_future_mwh.to_string(),
                c.end_future_mwh.to_string(),
                c.region_id.to_string(),
                c.regions.to_string(),
                c.partition_wall_time_s.to_string(),
            ];
            rec.extend(c.target.iter().map(|v| v.to_string()));
            rec.extend(c.end_storage.iter().map(|v| v.to_string()));
            rec.extend(c.slack.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("report csv", e))?;
        Ok(())
    }
}

fn mid_box(system: &CascadeSystem) -> Vec<f64> {
    system
        .reservoirs
        .iter()
        .map(|r| 0.5 * (r.v_min + r.v_max))
        .collect()
}

/// Storage clamped into the valuation box.
fn clamp_box(system: &CascadeSystem, v: &[f64]) -> Vec<f64> {
    system
        .reservoirs
        .iter()
        .zip(v)
        .map(|(r, &x)| x.clamp(r.v_min, r.v_max))
        .collect()
}

/// Rolling-horizon run: plan T weeks against rules for the following L weeks,
/// score the target under realized inflows, carry realized storage forward.
pub fn run_rolling(
    system: &CascadeSystem,
    truth: &TruthProcess,
    config: &SimConfig,
) -> Result<SimReport> {
    let v = validate_system(system);
    if !v.is_empty() {
        return Err(Error::Invalid(v));
    }
    config.validate()?;
    let n = system.len();
    if truth.profile.base.len() != n {
        return Err(Error::Domain(
            "truth profile and system have different sizes".into(),
        ));
    }
    let mut storage = match &config.initial_storage {
        Some(s) if s.len() == n => s.clone(),
        Some(_) => {
            return Err(Error::Domain(
                "initial storage needs one entry per reservoir".into(),
            ))
        }
        None => mid_box(system),
    };
    let future = FutureModelConfig {
        omega: config.omega,
        ..FutureModelConfig::with_l(config.l)
    };
    let partition = PartitionConfig {
        merge: config.merge,
        ..PartitionConfig::default()
    };
    let cycles = config.horizon / config.t;
    let mut reports = Vec::with_capacity(cycles);
    for c in 0..cycles {
        let start = c * config.t;
        let wrap = |e: Error| match e {
            Error::Infeasible(m) => Error::Infeasible(format!("cycle {c}: {m}")),
            Error::Domain(m) => Error::Domain(format!("cycle {c}: {m}")),
            Error::Numeric(m) => Error::Numeric(format!("cycle {c}: {m}")),
            Error::Resource(m) => Error::Resource(format!("cycle {c}: {m}")),
            other => other,
        };
        let profile = config.scenario.scale(start, config.horizon);
        let profile = truth.profile.scaled(truth.profile.name.clone(), profile);
        let cycle_truth = TruthProcess {
            profile: profile.clone(),
            seed: truth.seed,
        };
        let forecast = synthesize_forecast_at(
            config.seed.wrapping_add(c as u64),
            system,
            start,
            config.t + config.l,
            &profile,
            config.forecast_bias,
        );
        let t0 = Instant::now();
        let (rules, _stats) =
            build_rules(system, &forecast, config.t, &future, &partition).map_err(wrap)?;
        let partition_s = t0.elapsed().as_secs_f64();
        let mut problem = PlanningProblem::new(
            system.clone(),
            config.t,
            storage.clone(),
            forecast.head(config.t),
            rules.clone(),
            config.mode,
        );
        if let Some(e) = &config.epsilon {
            problem.epsilon = e.clone();
        }
        let plan = solve_plan(&problem).map_err(wrap)?;
        let realized = cycle_truth.sample(start, config.t);
        let st = evaluate_target(
            system,
            &realized,
            &storage,
            &plan.targets,
            slack_penalty(&rules),
        )
        .map_err(wrap)?;
        let end_future =
            evaluate_rules(&rules, &clamp_box(system, &st.end_storage)).map_err(wrap)?;

        let mut release = vec![0.0; n];
        let mut spill = vec![0.0; n];
        let mut schedule_mwh = 0.0;
        for week in &st.schedule {
            for (k, r) in week.reservoirs.iter().enumerate() {
                let d: f64 = r.units.iter().map(|u| u.discharge).sum();
                release[k] += ALPHA * d + r.spill;
                spill[k] += r.spill;
                schedule_mwh += r.units.iter().map(|u| LAMBDA * u.power).sum::<f64>();
            }
        }
        reports.push(CycleReport {
            cycle: c,
            start_week: start,
            initial_storage: storage.clone(),
            target: plan.targets.clone(),
            planned_immediate_mwh: plan.immediate_mwh,
            planned_future_mwh: plan.future_mwh,
            realized_inflow: realized,
            immediate_mwh: st.benefit_mwh,
            end_storage: st.end_storage.clone(),
            end_future_mwh: end_future.f_mwh,
            slack: st.slack.clone(),
            region_id: plan.region_id,
            regions: rules.regions.len(),
            partition_wall_time_s: partition_s,
            release,
            spill,
            schedule_mwh,
            schedule: st.schedule,
        });
        storage = st.end_storage;
    }
    let final_future = reports.last().map_or(0.0, |c| c.end_future_mwh);
    Ok(SimReport {
        seed: config.seed,
        config_hash: config.hash(),
        config: config.clone(),
        total_immediate_mwh: reports.iter().map(|c| c.immediate_mwh).sum(),
        total_planned_mwh: reports.iter().map(|c| c.planned_immediate_mwh).sum(),
        final_storage: storage,
        final_future_mwh: final_future,
        cycles: reports,
    })
}

/// Regular grid over reservoirs `i` and `j`; the others sit at `fixed`.
pub fn sample_surface(
    rules: &ValuationRules,
    i: usize,
    j: usize,
    per_dim: usize,
    fixed: &[f64],
) -> Result<Vec<SurfacePoint>> {
    let n = rules.dim();
    if i >= n || j >= n || i == j || fixed.len() != n {
        return Err(Error::Domain(format!(
            "surface axes ({i}, {j}) and {} fixed values do not fit {n} reservoirs",
            fixed.len()
        )));
    }
    let grid = uniform_grid(
        &[rules.v_min[i], rules.v_min[j]],
        &[rules.v_max[i], rules.v_max[j]],
        per_dim,
    );
    grid.into_iter()
        .map(|g| {
            let mut theta = fixed.to_vec();
            theta[i] = g[0];
            theta[j] = g[1];
            let e = evaluate_rules(rules, &theta)?;
            Ok(SurfacePoint {
                theta,
                region: e.region,
                f_mwh: e.f_mwh,
            })
        })
        .collect()
}

/// One point per grid value for a one-reservoir sweep.
pub fn sample_line(
    rules: &ValuationRules,
    i: usize,
    points: usize,
    fixed: &[f64],
) -> Result<Vec<SurfacePoint>> {
    let n = rules.dim();
    if i >= n || fixed.len() != n {
        return Err(Error::Domain(
            "sweep axis or fixed values do not fit the rules".into(),
        ));
    }
    uniform_grid(&[rules.v_min[i]], &[rules.v_max[i]], points)
        .into_iter()
        .map(|g| {
            let mut theta = fixed.to_vec();
            theta[i] = g[0];
            let e = evaluate_rules(rules, &theta)?;
            Ok(SurfacePoint {
                theta,
                region: e.region,
                f_mwh: e.f_mwh,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileLmwv {
    pub profile: String,
    pub scale: f64,
    pub regions: usize,
    /// `(1/R) Σ_r π_{r,n}`.
    pub mean_pi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmwvStudy {
    pub reservoirs: Vec<String>,
    pub rows: Vec<ProfileLmwv>,
    /// Trend checks that did not hold.
    pub findings: Vec<String>,
}

/// Mean LMWV per reservoir under each hydrology profile, with the dry ≥ wet
/// and downstream-nonincreasing checks.
pub fn seasonal_lmwv_study(
    system: &CascadeSystem,
    profiles: &[SeasonProfile],
    t: usize,
    future: &FutureModelConfig,
    seed: u64,
) -> Result<LmwvStudy> {
    let mut rows = Vec::with_capacity(profiles.len());
    for p in profiles {
        let forecast = synthesize_forecast(seed, system, t, future.l, p);
        let (rules, _) = build_rules(system, &forecast, t, future, &PartitionConfig::default())?;
        rows.push(ProfileLmwv {
            profile: p.name.clone(),
            scale: p.scale,
            regions: rules.regions.len(),
            mean_pi: rules.mean_pi(),
        });
    }
    let ids: Vec<String> = system.reservoirs.iter().map(|r| r.id.clone()).collect();
    let tol = |a: f64, b: f64| 1e-6 * (1.0 + a.abs().max(b.abs()));
    let mut findings = Vec::new();
    let up = system.upstream_indices();
    for row in &rows {
        for (n, ups) in up.iter().enumerate() {
            for &m in ups {
                if row.mean_pi[n] > row.mean_pi[m] + tol(row.mean_pi[n], row.mean_pi[m]) {
                    findings.push(format!(
                        "{}: mean π of {} ({:.4}) exceeds upstream {} ({:.4})",
                        row.profile, ids[n], row.mean_pi[n], ids[m], row.mean_pi[m]
                    ));
                }
            }
        }
    }
    for dry in &rows {
        for wet in rows.iter().filter(|w| w.scale > dry.scale) {
            for n in 0..ids.len() {
                if dry.mean_pi[n] + tol(dry.mean_pi[n], wet.mean_pi[n]) < wet.mean_pi[n] {
                    findings.push(format!(
                        "{}: mean π under {} ({:.4}) below {} ({:.4})",
                        ids[n], dry.profile, dry.mean_pi[n], wet.profile, wet.mean_pi[n]
                    ));
                }
            }
        }
    }
    Ok(LmwvStudy {
        reservoirs: ids,
        rows,
        findings,
    })
}
