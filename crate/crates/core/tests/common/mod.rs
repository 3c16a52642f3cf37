#![allow(dead_code)]

use carryover_core::sim::SimReport;
use carryover_core::solver::{LinExpr, ModelBuilder, ParametricMilp};
use carryover_core::system::{
    curve_power, CascadeSystem, HydroUnit, PiecewiseCurve, Reservoir, ALPHA, LAMBDA,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense solve of `m·x = r` by Gaussian elimination; `None` when singular.
pub fn dense_solve(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for col in 0..n {
        let piv =
            (col..n).max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                if f != 0.0 {
                    for k in col..n {
                        m[row][k] -= f * m[col][k];
                    }
                    r[row] -= f * r[col];
                }
            }
        }
    }
    Some((0..n).map(|i| r[i] / m[i][i]).collect())
}

/// Best vertex of `max c'x, Ax ≤ b, x ≥ 0` by enumerating every choice of
/// `n` active constraints.
pub fn vertex_enumeration(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<f64> {
    let n = c.len();
    let m = a.len();
    let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().cloned()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        rows.push((e, 0.0));
    }
    let total = m + n;
    let mut best: Option<f64> = None;
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let mm: Vec<Vec<f64>> = pick.iter().map(|&i| rows[i].0.clone()).collect();
        let rr: Vec<f64> = pick.iter().map(|&i| rows[i].1).collect();
        if let Some(x) = dense_solve(mm, rr) {
            let feasible = rows.iter().all(|(row, rhs)| {
                row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= rhs + 1e-9
            });
            if feasible {
                let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < total - n + i {
                pick[i] += 1;
                for k in i + 1..n {
                    pick[k] = pick[k - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Random bounded MILP with `p` continuous and `q` binary columns and `m`
/// rows; always feasible at `x = 0, y = 0`.
pub fn random_milp(seed: u64, p: usize, q: usize, m: usize) -> ParametricMilp<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mb = ModelBuilder::new(0);
    let xs: Vec<_> = (0..p).map(|j| mb.continuous(format!("x{j}"))).collect();
    let ys: Vec<_> = (0..q).map(|j| mb.binary(format!("y{j}"))).collect();
    for &x in &xs {
        mb.add_objective(x, rng.gen_range(-1.0..4.0));
    }
    for &y in &ys {
        mb.add_objective(y, rng.gen_range(-3.0..5.0));
    }
    for i in 0..m {
        let mut e = LinExpr::new();
        for &x in &xs {
            if rng.gen_bool(0.7) {
                e.add(x, rng.gen_range(-1.0..3.0));
            }
        }
        for &y in &ys {
            if rng.gen_bool(0.5) {
                e.add(y, rng.gen_range(-2.0..4.0));
            }
        }
        mb.le(
            &e,
            &LinExpr::constant(rng.gen_range(1.0..8.0)),
            format!("r{i}"),
        );
    }
    // keep the relaxation bounded
    let mut total = LinExpr::new();
    for &x in &xs {
        total.add(x, 1.0);
    }
    mb.le(&total, &LinExpr::constant(10.0), "box");
    // couple continuous capacity to binaries so the choice matters
    for (k, &y) in ys.iter().enumerate() {
        if let Some(&x) = xs.get(k % p.max(1)) {
            let mut e = LinExpr::var(x, 1.0);
            e.add(y, -rng.gen_range(1.0..4.0));
            mb.le(
                &e,
                &LinExpr::constant(rng.gen_range(0.5..2.0)),
                format!("link{k}"),
            );
        }
    }
    mb.build()
}

pub fn reservoir(
    id: &str,
    v_min: f64,
    v_max: f64,
    units: Vec<HydroUnit>,
    up: &[&str],
) -> Reservoir {
    Reservoir {
        id: id.into(),
        v_min,
        v_max,
        spill_penalty: 1.0,
        units,
        direct_upstream: up.iter().map(|s| s.to_string()).collect(),
    }
}

/// Concave two-segment unit through the origin.
pub fn concave_unit(id: &str, k1: f64, k2: f64, d_break: f64, d_max: f64) -> HydroUnit {
    let p1 = k1 * d_break;
    let p2 = p1 + k2 * (d_max - d_break);
    HydroUnit {
        id: id.into(),
        p_min: 0.0,
        p_max: p2,
        d_min: 0.0,
        d_max,
        curve: PiecewiseCurve::new(vec![(0.0, 0.0), (d_break, p1), (d_max, p2)]),
    }
}

/// Random chain of 1–3 reservoirs with concave units, plus weekly inflows.
pub fn random_chain(seed: u64, l: usize) -> (CascadeSystem, Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = rng.gen_range(1..=3);
    let mut reservoirs = Vec::new();
    for k in 0..n {
        let units = (0..rng.gen_range(1..=2))
            .map(|i| {
                let k1 = rng.gen_range(1.0..3.0);
                let k2 = k1 * rng.gen_range(0.3..0.95);
                let dm = rng.gen_range(5.0..20.0);
                concave_unit(&format!("u{i}"), k1, k2, dm * rng.gen_range(0.3..0.7), dm)
            })
            .collect();
        let id = format!("r{k}");
        let prev = format!("r{}", k.wrapping_sub(1));
        let up: Vec<&str> = if k == 0 { vec![] } else { vec![prev.as_str()] };
        let v_min = rng.gen_range(0.0..5.0);
        let v_max = v_min + rng.gen_range(10.0..60.0);
        let mut r = reservoir(&id, v_min, v_max, units, &up);
        r.spill_penalty = rng.gen_range(0.5..50.0);
        reservoirs.push(r);
    }
    let sys = CascadeSystem {
        reservoirs,
        delay: 0,
    };
    let weekly: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..l).map(|_| rng.gen_range(0.0..8.0)).collect())
        .collect();
    let theta = sys
        .reservoirs
        .iter()
        .map(|r| rng.gen_range(r.v_min..=r.v_max))
        .collect();
    (sys, weekly, theta)
}

/// Random MILP whose right-hand side moves with `θ ∈ [0,1]^n`; feasible at
/// `x = 0, y = 0` for every such θ.
pub fn random_parametric_milp(
    seed: u64,
    p: usize,
    q: usize,
    m: usize,
    n: usize,
) -> ParametricMilp<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mb = ModelBuilder::new(n);
    let xs: Vec<_> = (0..p).map(|j| mb.continuous(format!("x{j}"))).collect();
    let ys: Vec<_> = (0..q).map(|j| mb.binary(format!("y{j}"))).collect();
    for &x in &xs {
        mb.add_objective(x, rng.gen_range(0.0..4.0));
    }
    for &y in &ys {
        mb.add_objective(y, rng.gen_range(-1.0..2.0));
    }
    for i in 0..m {
        let mut e = LinExpr::new();
        for &x in &xs {
            if rng.gen_bool(0.7) {
                e.add(x, rng.gen_range(-0.5..3.0));
            }
        }
        for &y in &ys {
            if rng.gen_bool(0.4) {
                e.add(y, rng.gen_range(-1.0..2.0));
            }
        }
        let mut rhs = LinExpr::constant(rng.gen_range(1.0..4.0));
        for k in 0..n {
            rhs.add_theta(k, rng.gen_range(-0.4..2.0));
        }
        mb.le(&e, &rhs, format!("r{i}"));
    }
    let mut total = LinExpr::new();
    for &x in &xs {
        total.add(x, 1.0);
    }
    let mut cap = LinExpr::constant(3.0);
    for k in 0..n {
        cap.add_theta(k, 1.0);
    }
    mb.le(&total, &cap, "box");
    for (k, &y) in ys.iter().enumerate() {
        let x = xs[k % p];
        let mut e = LinExpr::var(x, 1.0);
        e.add(y, -rng.gen_range(0.5..2.0));
        mb.le(
            &e,
            &LinExpr::constant(rng.gen_range(0.3..1.5)),
            format!("link{k}"),
        );
    }
    mb.build()
}

/// `max x + 0.3y`, `x ≤ θ`, `x ≤ 1 − 0.6y`: three regions on `[0, 1]`.
pub fn bonus_toy() -> ParametricMilp<f64> {
    let mut mb = ModelBuilder::new(1);
    let x = mb.continuous("x");
    let y = mb.binary("y");
    mb.add_objective(x, 1.0);
    mb.add_objective(y, 0.3);
    mb.le(&LinExpr::var(x, 1.0), &LinExpr::theta(0, 1.0), "cap-theta");
    let mut rhs = LinExpr::constant(1.0);
    rhs.add(y, -0.6);
    mb.le(&LinExpr::var(x, 1.0), &rhs, "cap-bonus");
    mb.build()
}

/// Water and energy identities of every cycle, recomputed from the dispatch.
pub fn check_accounting(system: &CascadeSystem, report: &SimReport) {
    let up = system.upstream_indices();
    for (k, c) in report.cycles.iter().enumerate() {
        if k > 0 {
            let prev = &report.cycles[k - 1].end_storage;
            for (a, b) in prev.iter().zip(&c.initial_storage) {
                assert!((a - b).abs() < 1e-6, "continuity broken at cycle {k}");
            }
        }
        let release: Vec<Vec<f64>> = (0..system.len())
            .map(|n| {
                c.schedule
                    .iter()
                    .map(|w| {
                        let r = &w.reservoirs[n];
                        ALPHA * r.units.iter().map(|u| u.discharge).sum::<f64>() + r.spill
                    })
                    .collect()
            })
            .collect();
        for n in 0..system.len() {
            let inflow: f64 = c.realized_inflow[n].iter().sum();
            let routed: f64 = up[n].iter().map(|&m| release[m].iter().sum::<f64>()).sum();
            let own: f64 = release[n].iter().sum();
            let end = c.initial_storage[n] + inflow + routed - own;
            assert!(
                (end - c.end_storage[n]).abs() < 1e-6,
                "cycle {k} reservoir {n}: {end} vs {}",
                c.end_storage[n]
            );
            assert!((own - c.release[n]).abs() < 1e-6);
        }
        let mut mwh = 0.0;
        for w in &c.schedule {
            for (n, r) in w.reservoirs.iter().enumerate() {
                for (u, unit) in r.units.iter().zip(&system.reservoirs[n].units) {
                    let p = curve_power(
                        &unit.operating_curve(),
                        u.discharge.clamp(unit.d_min, unit.d_max),
                    )
                    .unwrap();
                    assert!((u.power - p).abs() < 1e-6 * (1.0 + p));
                    mwh += LAMBDA * u.power;
                }
            }
        }
        assert!((mwh - c.immediate_mwh).abs() < 1e-6 * (1.0 + mwh));
        assert!((c.schedule_mwh - c.immediate_mwh).abs() < 1e-6 * (1.0 + mwh));
    }
    let total: f64 = report.cycles.iter().map(|c| c.immediate_mwh).sum();
    assert!((total - report.total_immediate_mwh).abs() < 1e-6 * (1.0 + total));
}
