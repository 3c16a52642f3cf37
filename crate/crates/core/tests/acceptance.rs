//! End-to-end acceptance checks. Runs without the libtest harness so that
//! each criterion prints a single PASS/FAIL line.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use carryover_core::forecast::{
    gmm_cdf, gmm_quantile, synthesize_forecast, GmmForecast, ScalarGmm,
};
use carryover_core::future::{
    aggregation_gap, build_future_milp, future_inflows, sample_box, FutureModelConfig,
};
use carryover_core::mp::{
    emit_milp_constraints, evaluate_rules, partition_then_extract, uniform_grid, PartitionConfig,
    RulesMeta, ValuationRules, CONTAIN_TOL,
};
use carryover_core::planner::{chance_violation_rates, solve_plan, PlanMode, PlanningProblem};
use carryover_core::sim::{
    build_rules, generate_case, run_rolling, seasonal_lmwv_study, CaseKind, SimConfig,
};
use carryover_core::solver::{
    brute_force_milp, solve_milp, LinExpr, MilpStatus, ModelBuilder, Polytope,
};
use carryover_core::system::{CascadeSystem, HydroUnit, ALPHA, LAMBDA};
use carryover_core::Milp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

/// Two-reservoir case with its future-period model and rules.
struct TwoReservoir {
    system: CascadeSystem,
    forecast: GmmForecast<f64>,
    config: FutureModelConfig,
    milp: Milp,
    rules: ValuationRules,
    wall: Duration,
}

fn two_reservoir() -> TwoReservoir {
    let case = generate_case(CaseKind::TwoReservoir, 1);
    let forecast = synthesize_forecast(1, &case.system, 4, 4, &case.truth.profile);
    let config = FutureModelConfig {
        omega: 0.75,
        ..FutureModelConfig::with_l(4)
    };
    let milp = build_future_milp(&case.system, &future_inflows(&forecast, 4, 4), &config)
        .unwrap()
        .milp;
    let start = Instant::now();
    let (rules, _) = build_rules(
        &case.system,
        &forecast,
        4,
        &config,
        &PartitionConfig::default(),
    )
    .unwrap();
    TwoReservoir {
        system: case.system,
        forecast,
        config,
        milp,
        rules,
        wall: start.elapsed(),
    }
}

fn optimum(m: &Milp, theta: &[f64]) -> f64 {
    let s = solve_milp(m, theta, &[]).unwrap();
    assert!(s.is_optimal(), "no optimum at {theta:?}");
    s.objective
}

fn ac1(tr: &TwoReservoir) -> Outcome {
    let r = &tr.rules;
    let grid = uniform_grid(&r.v_min, &r.v_max, 100);
    let cov = r.coverage(&grid);
    ensure!(cov.points == 10_000, "{} grid points", cov.points);
    ensure!(
        cov.exact(),
        "{} uncovered, {} overlapping",
        cov.uncovered,
        cov.overlapping
    );
    ensure!(
        tr.wall.as_secs_f64() < 60.0,
        "partition took {:.1} s",
        tr.wall.as_secs_f64()
    );
    Ok(format!(
        "{} regions, 10000 points each in exactly one, {:.2} s",
        r.regions.len(),
        tr.wall.as_secs_f64()
    ))
}

fn ac2(tr: &TwoReservoir) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let th: Vec<f64> = (0..2)
            .map(|k| rng.gen_range(tr.rules.v_min[k]..=tr.rules.v_max[k]))
            .collect();
        let e = evaluate_rules(&tr.rules, &th).unwrap();
        let region = tr.rules.regions.iter().find(|g| g.id == e.region).unwrap();
        let piece = region.value.eval(&th);
        let best = optimum(&tr.milp, &th);
        worst = worst.max(rel(piece, best));
        ensure!(
            rel(piece, best) <= 1e-6,
            "θ={th:?}: region {piece} vs MILP {best}"
        );
    }
    Ok(format!("200 points, worst relative error {worst:.2e}"))
}

fn ac3(tr: &TwoReservoir) -> Outcome {
    let span: Vec<f64> = tr
        .rules
        .v_max
        .iter()
        .zip(&tr.rules.v_min)
        .map(|(a, b)| a - b)
        .collect();
    let mut worst: f64 = 0.0;
    for g in &tr.rules.regions {
        for k in 0..2 {
            let h = 1e-3 * span[k];
            let (mut up, mut dn) = (g.center.clone(), g.center.clone());
            up[k] += h;
            dn[k] -= h;
            let fd = (optimum(&tr.milp, &up) - optimum(&tr.milp, &dn)) / (2.0 * h);
            worst = worst.max(rel(fd, g.pi[k]));
            ensure!(
                rel(fd, g.pi[k]) <= 1e-4,
                "region {} axis {k}: difference quotient {fd} vs π {} (radius {:.3e}, h {h:.3e})",
                g.id,
                g.pi[k],
                g.radius
            );
        }
    }
    Ok(format!(
        "{} centers, worst relative error {worst:.2e}",
        tr.rules.regions.len()
    ))
}

fn ac4() -> Outcome {
    let sys = CascadeSystem {
        // unit large enough to pass all stored water within the future period
        reservoirs: vec![common::reservoir(
            "r",
            0.0,
            30.0,
            vec![HydroUnit::linear("u", 2.0, 100.0)],
            &[],
        )],
        delay: 0,
    };
    let cfg = FutureModelConfig {
        omega: 0.5,
        ..FutureModelConfig::with_l(4)
    };
    let fm = build_future_milp(&sys, &[0.0], &cfg).unwrap();
    let space = Polytope::boxed(&[0.0], &[30.0]);
    let (set, _) =
        partition_then_extract(&fm.milp, &space, None, &PartitionConfig::default()).unwrap();
    ensure!(set.regions.len() == 1, "{} regions", set.regions.len());
    let pi = set.regions[0].pi[0];
    ensure!(rel(pi, 555.5556) <= 1e-6, "π = {pi}");
    ensure!(rel(pi, LAMBDA * 2.0 / ALPHA) <= 1e-9, "π = {pi}");
    Ok(format!("π = {pi:.4} MWh/Mm³"))
}

fn ac5() -> Outcome {
    let case = generate_case(CaseKind::EightReservoir, 1);
    let cfg = FutureModelConfig {
        omega: case.omega,
        ..FutureModelConfig::with_l(4)
    };
    let base = &case.truth.profile;
    let profiles = vec![base.scaled("dry", 0.7), base.scaled("wet", 1.3)];
    let mut lines = Vec::new();
    let mut rows = Vec::new();
    for p in &profiles {
        let start = Instant::now();
        let study = seasonal_lmwv_study(&case.system, std::slice::from_ref(p), 4, &cfg, 1).unwrap();
        let wall = start.elapsed().as_secs_f64();
        ensure!(wall < 600.0, "{} run took {wall:.0} s", p.name);
        lines.push(format!(
            "{} {} regions {wall:.0} s",
            p.name, study.rows[0].regions
        ));
        rows.push(study.rows[0].mean_pi.clone());
    }
    let tol = |a: f64, b: f64| 1e-6 * (1.0 + a.abs().max(b.abs()));
    for (name, pi) in ["dry", "wet"].iter().zip(&rows) {
        for n in 1..pi.len() {
            ensure!(
                pi[n] <= pi[n - 1] + tol(pi[n], pi[n - 1]),
                "{name}: π rises at reservoir {n}: {pi:?}"
            );
        }
    }
    for n in 0..rows[0].len() {
        ensure!(
            rows[0][n] >= rows[1][n] - tol(rows[0][n], rows[1][n]),
            "reservoir {n}: dry {} < wet {}",
            rows[0][n],
            rows[1][n]
        );
    }
    Ok(format!(
        "{}; head π dry {:.1} wet {:.1}, tail π dry {:.1} wet {:.1}",
        lines.join(", "),
        rows[0][0],
        rows[1][0],
        rows[0][7],
        rows[1][7]
    ))
}

fn ac6(tr: &TwoReservoir) -> Outcome {
    let thetas = sample_box(&tr.system, 100, 6);
    let stats = aggregation_gap(&tr.system, &tr.forecast, 4, &tr.config, &thetas).unwrap();
    ensure!(
        stats.samples.len() == 100,
        "{} samples, {} skipped",
        stats.samples.len(),
        stats.skipped
    );
    ensure!(stats.min >= -1e-6, "minimum gap {:.3e}%", stats.min);
    Ok(format!(
        "gap min {:.4}% mean {:.4}% max {:.4}%",
        stats.min, stats.mean, stats.max
    ))
}

fn ac7() -> Outcome {
    let case = generate_case(CaseKind::TwoReservoir, 3);
    let f = synthesize_forecast(5, &case.system, 4, 4, &case.truth.profile);
    let cfg = FutureModelConfig {
        omega: case.omega,
        ..FutureModelConfig::with_l(4)
    };
    let (rules, _) = build_rules(&case.system, &f, 4, &cfg, &PartitionConfig::default()).unwrap();
    let mut p = PlanningProblem::new(
        case.system.clone(),
        4,
        case.initial_storage.clone(),
        f.head(4),
        rules,
        PlanMode::Ccp,
    );
    p.epsilon = vec![0.010, 0.015, 0.020, 0.025];
    let plan = solve_plan(&p).unwrap();
    let rates = chance_violation_rates(&p, &plan, 100_000, 17).unwrap();
    for (t, (&r, &e)) in rates.iter().zip(&p.epsilon).enumerate() {
        ensure!(
            r <= e + 0.005,
            "week {}: violation rate {r} > {e} + 0.005",
            t + 1
        );
    }
    let shown: Vec<String> = rates.iter().map(|r| format!("{r:.4}")).collect();
    Ok(format!("weekly violation rates [{}]", shown.join(", ")))
}

/// Bisection on the mixture CDF, written against `libm` directly.
fn bisection_quantile(g: &ScalarGmm<f64>, p: f64) -> f64 {
    let cdf = |x: f64| -> f64 {
        g.beta
            .iter()
            .zip(&g.mu)
            .zip(&g.var)
            .map(|((b, m), v)| {
                b * 0.5 * libm::erfc(-(x - m) / (v.sqrt() * std::f64::consts::SQRT_2))
            })
            .sum()
    };
    let (mut lo, mut hi) = (-1e3, 1e3);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn ac8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut rt, mut bis): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let g = rng.gen_range(1..5);
        let mut beta: Vec<f64> = (0..g).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = beta.iter().sum();
        beta.iter_mut().for_each(|b| *b /= total);
        let gmm = ScalarGmm {
            beta,
            mu: (0..g).map(|_| rng.gen_range(-20.0..20.0)).collect(),
            var: (0..g)
                .map(|_| rng.gen_range(0.05f64..3.0).powi(2))
                .collect(),
        };
        for &p in &[0.0025, 0.005, 0.5, 0.975, 0.995] {
            let q = gmm_quantile(&gmm, p).unwrap();
            let b = bisection_quantile(&gmm, p);
            rt = rt.max((gmm_cdf(&gmm, q) - p).abs());
            bis = bis.max((q - b).abs());
            ensure!(
                (gmm_cdf(&gmm, q) - p).abs() <= 1e-9,
                "round trip at p={p}: {}",
                gmm_cdf(&gmm, q)
            );
            ensure!((q - b).abs() <= 1e-8, "p={p}: Newton {q} vs bisection {b}");
        }
    }
    Ok(format!(
        "500 quantiles, round trip {rt:.1e}, bisection {bis:.1e}"
    ))
}

/// Maximize F alone through the embedded rules, optionally with V fixed.
fn embed_max(rules: &ValuationRules, fix: Option<&[f64]>) -> (f64, Vec<f64>) {
    let n = rules.dim();
    let mut mb = ModelBuilder::new(0);
    let v: Vec<_> = (0..n).map(|k| mb.continuous(format!("v{k}"))).collect();
    let exprs: Vec<LinExpr<f64>> = v.iter().map(|&x| LinExpr::var(x, 1.0)).collect();
    for k in 0..n {
        mb.le(
            &exprs[k],
            &LinExpr::constant(rules.v_max[k]),
            format!("hi{k}"),
        );
        mb.le(
            &LinExpr::constant(rules.v_min[k]),
            &exprs[k],
            format!("lo{k}"),
        );
        if let Some(p) = fix {
            mb.eq(&exprs[k], &LinExpr::constant(p[k]), format!("fix{k}"));
        }
    }
    let emb = emit_milp_constraints(rules, &mut mb, &exprs, None, "F").unwrap();
    mb.add_objective_expr(&emb.future_value);
    let s = solve_milp(&mb.build(), &[], &[]).unwrap();
    assert!(s.is_optimal());
    (
        s.objective,
        emb.z.iter().map(|z| z.value(&s.x, &s.y)).collect(),
    )
}

fn ac9(tr: &TwoReservoir) -> Outcome {
    let r = &tr.rules;
    let (best, _) = embed_max(r, None);
    let grid = uniform_grid(&r.v_min, &r.v_max, 101)
        .iter()
        .map(|v| evaluate_rules(r, v).unwrap().f_mwh)
        .fold(f64::NEG_INFINITY, f64::max);
    ensure!(
        (best - grid).abs() <= 1e-6 * (1.0 + grid.abs()),
        "embedded max {best} vs grid {grid}"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let v: Vec<f64> = (0..2)
            .map(|k| rng.gen_range(r.v_min[k]..=r.v_max[k]))
            .collect();
        let (f, z) = embed_max(r, Some(&v));
        let e = evaluate_rules(r, &v).unwrap();
        let chosen: Vec<usize> = z
            .iter()
            .enumerate()
            .filter(|(_, &zz)| zz > 0.5)
            .map(|(k, _)| k)
            .collect();
        ensure!(
            chosen.len() == 1,
            "V={v:?}: {} indicators set",
            chosen.len()
        );
        let region = &r.regions[chosen[0]];
        // boundary points may pick either neighbour
        ensure!(
            region.id == e.region || region.contains(&v, CONTAIN_TOL),
            "V={v:?}: Z picks region {} but V lies in {}",
            region.id,
            e.region
        );
        ensure!(
            (f - e.f_mwh).abs() <= 1e-6 * (1.0 + e.f_mwh.abs()),
            "V={v:?}: {f} vs {}",
            e.f_mwh
        );
    }
    Ok(format!("max F {best:.3} MWh, 100 indicator checks"))
}

fn ac10() -> Outcome {
    let mut solved = 0;
    for seed in 0..50u64 {
        let q = 4 + (seed % 9) as usize;
        let m = common::random_milp(1000 + seed, 4, q, 6);
        let s = solve_milp(&m, &[], &[]).unwrap();
        let b = brute_force_milp(&m, &[]).unwrap();
        ensure!(
            s.status == b.status,
            "seed {seed}: {:?} vs {:?}",
            s.status,
            b.status
        );
        if s.status == MilpStatus::Optimal {
            solved += 1;
            ensure!(
                (s.objective - b.objective).abs() <= 1e-8,
                "seed {seed}: {} vs {}",
                s.objective,
                b.objective
            );
        }
    }
    Ok(format!("50 instances with 4-12 binaries, {solved} optimal"))
}

fn ac11() -> Outcome {
    let case = generate_case(CaseKind::TwoReservoir, 11);
    let cfg = SimConfig {
        horizon: 52,
        seed: 11,
        initial_storage: Some(case.initial_storage.clone()),
        ..SimConfig::default()
    };
    let start = Instant::now();
    let a = run_rolling(&case.system, &case.truth, &cfg).unwrap();
    let wall = start.elapsed().as_secs_f64();
    ensure!(a.cycles.len() == 13, "{} cycles", a.cycles.len());
    common::check_accounting(&case.system, &a);
    let b = run_rolling(&case.system, &case.truth, &cfg).unwrap();
    let strip = |mut r: carryover_core::sim::SimReport| {
        r.cycles
            .iter_mut()
            .for_each(|c| c.partition_wall_time_s = 0.0);
        r.to_json()
    };
    ensure!(strip(a.clone()) == strip(b), "reruns differ");
    ensure!(wall < 900.0, "run took {wall:.0} s");
    Ok(format!(
        "13 cycles, {:.1} MWh, {wall:.1} s",
        a.total_immediate_mwh
    ))
}

fn ac12() -> Outcome {
    let (set, _) = partition_then_extract(
        &common::bonus_toy(),
        &Polytope::boxed(&[0.0], &[1.0]),
        None,
        &PartitionConfig::default(),
    )
    .unwrap();
    let rules = ValuationRules::new(set, vec![0.0], RulesMeta::default());
    let mut found: Vec<(f64, f64, f64)> = rules
        .regions
        .iter()
        .map(|r| {
            let p = r.polytope();
            let hi = p.maximize(&[1.0]).unwrap().unwrap().0;
            let lo = -p.maximize(&[-1.0]).unwrap().unwrap().0;
            (lo, hi, r.pi[0])
        })
        .collect();
    found.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let want = [(0.0, 0.4, 1.0), (0.4, 0.7, 0.0), (0.7, 1.0, 1.0)];
    ensure!(found.len() == 3, "regions {found:?}");
    for (f, w) in found.iter().zip(&want) {
        ensure!(
            (f.0 - w.0).abs() < 1e-6 && (f.1 - w.1).abs() < 1e-6 && (f.2 - w.2).abs() < 1e-9,
            "regions {found:?}"
        );
    }
    for i in 0..=1000 {
        let th = i as f64 / 1000.0;
        let oracle = (th.min(0.4) + 0.3).max(th);
        let r = &rules.regions[evaluate_rules(&rules, &[th]).unwrap().region];
        ensure!((r.value.eval(&[th]) - oracle).abs() < 1e-9, "θ={th}");
    }
    Ok("[0,0.4] slope 1, [0.4,0.7] slope 0, [0.7,1] slope 1".into())
}

fn main() {
    let tr = catch_unwind(two_reservoir).ok();
    let need = |f: fn(&TwoReservoir) -> Outcome| {
        let tr = tr.as_ref();
        move || match tr {
            Some(t) => f(t),
            None => Err("two-reservoir rules could not be built".into()),
        }
    };
    let checks: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("AC1 partition coverage", Box::new(need(ac1))),
        ("AC2 parametric value", Box::new(need(ac2))),
        ("AC3 LMWV as derivative", Box::new(need(ac3))),
        ("AC4 analytic LMWV", Box::new(ac4)),
        ("AC5 cascade and seasonal trends", Box::new(ac5)),
        ("AC6 aggregation gap", Box::new(need(ac6))),
        ("AC7 chance constraints", Box::new(ac7)),
        ("AC8 quantiles", Box::new(ac8)),
        ("AC9 rules embedding", Box::new(need(ac9))),
        ("AC10 MILP oracle", Box::new(ac10)),
        ("AC11 rolling simulation", Box::new(ac11)),
        ("AC12 toy partition", Box::new(ac12)),
    ];
    let mut failed = 0;
    for (name, check) in &checks {
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(msg) => println!("PASS {name} ({secs:.1} s): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1} s): {msg}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        checks.len() - failed,
        checks.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
