mod common;

use carryover_core::solver::{
    brute_force_milp, remove_redundant, solve_lp, solve_milp, Halfspace, LinExpr, LpStatus,
    MilpStatus, ModelBuilder, ParametricMilp, RowSense,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dense_model(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> ParametricMilp<f64> {
    let mut mb = ModelBuilder::new(0);
    let xs: Vec<_> = (0..c.len())
        .map(|j| mb.continuous(format!("x{j}")))
        .collect();
    for (j, &cj) in c.iter().enumerate() {
        mb.add_objective(xs[j], cj);
    }
    for (i, row) in a.iter().enumerate() {
        let mut e = LinExpr::new();
        for (j, &v) in row.iter().enumerate() {
            e.add(xs[j], v);
        }
        mb.le(&e, &LinExpr::constant(b[i]), format!("r{i}"));
    }
    mb.build()
}

fn random_lp(seed: u64, m: usize, n: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.gen_range(-0.5..2.0)).collect())
        .collect();
    let b: Vec<f64> = (0..m).map(|_| rng.gen_range(1.0..5.0)).collect();
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..3.0)).collect();
    (a, b, c)
}

fn bounded(a: &mut Vec<Vec<f64>>, b: &mut Vec<f64>, n: usize) {
    a.push(vec![1.0; n]);
    b.push(20.0);
}

#[test]
fn random_lps_match_vertex_enumeration() {
    for seed in 0..40 {
        let (mut a, mut b, c) = random_lp(seed, 5, 8);
        bounded(&mut a, &mut b, 8);
        let model = dense_model(&a, &b, &c);
        let s = solve_lp(&model, &[], None).unwrap();
        let oracle = common::vertex_enumeration(&a, &b, &c).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(
            (s.objective - oracle).abs() < 1e-8,
            "seed {seed}: {} vs {oracle}",
            s.objective
        );
    }
}

#[test]
fn strong_duality_and_dual_signs() {
    for seed in 100..160 {
        let (mut a, mut b, c) = random_lp(seed, 7, 6);
        bounded(&mut a, &mut b, 6);
        let model = dense_model(&a, &b, &c);
        let s = solve_lp(&model, &[], None).unwrap();
        assert!(s.is_optimal());
        let dual_obj: f64 = s.duals.iter().zip(&b).map(|(y, r)| y * r).sum();
        assert!((dual_obj - s.objective).abs() <= 1e-8 * (1.0 + s.objective.abs()));
        assert!(s.duals.iter().all(|&y| y >= -1e-9));
        // dual feasibility A'y ≥ c
        for j in 0..c.len() {
            let col: f64 = (0..a.len()).map(|i| a[i][j] * s.duals[i]).sum();
            assert!(col >= c[j] - 1e-8);
        }
        // complementary slackness
        for i in 0..a.len() {
            let lhs: f64 = a[i].iter().zip(&s.x).map(|(p, q)| p * q).sum();
            assert!(s.duals[i] * (b[i] - lhs) <= 1e-8 * (1.0 + s.objective.abs()));
        }
    }
}

#[test]
fn degenerate_lp_terminates() {
    // many constraints through the optimal vertex
    let mut a = Vec::new();
    let mut b = Vec::new();
    for k in 0..12 {
        let t = k as f64 / 11.0;
        a.push(vec![t, 1.0 - t, 0.5]);
        b.push(1.0);
    }
    let model = dense_model(&a, &b, &[1.0, 1.0, 1.0]);
    let s = solve_lp(&model, &[], None).unwrap();
    let oracle = common::vertex_enumeration(&a, &b, &[1.0, 1.0, 1.0]).unwrap();
    assert!((s.objective - oracle).abs() < 1e-9);
}

#[test]
fn parameterized_rhs_and_fixed_binaries() {
    let mut mb = ModelBuilder::<f64>::new(1);
    let x = mb.continuous("x");
    let y = mb.binary("y");
    mb.add_objective(x, 1.0);
    mb.add_objective(y, 0.3);
    mb.le(&LinExpr::var(x, 1.0), &LinExpr::theta(0, 1.0), "theta");
    let mut cap = LinExpr::var(x, 1.0);
    cap.add(y, 0.6);
    mb.le(&cap, &LinExpr::constant(1.0), "cap");
    let m = mb.build();
    let s1 = solve_lp(&m, &[0.9], Some(&[1.0])).unwrap();
    assert!((s1.objective - 0.7).abs() < 1e-12);
    assert!((s1.duals[1] - 1.0).abs() < 1e-12 && s1.duals[0].abs() < 1e-12);
    let s0 = solve_lp(&m, &[0.9], Some(&[0.0])).unwrap();
    assert!((s0.objective - 0.9).abs() < 1e-12);
    let best = solve_milp(&m, &[0.9], &[]).unwrap();
    assert_eq!(best.y, vec![0.0]);
    let best = solve_milp(&m, &[0.5], &[]).unwrap();
    assert_eq!(best.y, vec![1.0]);
    assert!((best.objective - 0.7).abs() < 1e-12);
}

#[test]
fn equality_rows_in_milp() {
    // choose exactly one of three items
    let mut mb = ModelBuilder::<f64>::new(0);
    let ys: Vec<_> = (0..3).map(|k| mb.binary(format!("y{k}"))).collect();
    let x = mb.continuous("x");
    for (k, &y) in ys.iter().enumerate() {
        mb.add_objective(y, [1.0, 3.0, 2.0][k]);
    }
    mb.add_objective(x, 1.0);
    let mut one = LinExpr::new();
    for &y in &ys {
        one.add(y, 1.0);
    }
    mb.eq(&one, &LinExpr::constant(1.0), "one");
    let mut lim = LinExpr::var(x, 1.0);
    lim.add(ys[1], 2.0);
    mb.le(&lim, &LinExpr::constant(1.5), "lim");
    let m = mb.build();
    assert_eq!(m.sense[0], RowSense::Eq);
    let s = solve_milp(&m, &[], &[]).unwrap();
    let b = brute_force_milp(&m, &[]).unwrap();
    assert!((s.objective - b.objective).abs() < 1e-9);
    assert!((s.objective - 3.5).abs() < 1e-9);
}

#[test]
fn milp_matches_brute_force_and_is_feasible() {
    for seed in 0..30 {
        let m = common::random_milp(seed, 4, 8, 6);
        let s = solve_milp(&m, &[], &[]).unwrap();
        let b = brute_force_milp(&m, &[]).unwrap();
        assert_eq!(s.status, b.status);
        if s.status == MilpStatus::Optimal {
            assert!((s.objective - b.objective).abs() <= 1e-8, "seed {seed}");
            assert!(s.y.iter().all(|&v| v == 0.0 || v == 1.0));
            assert!(m.max_violation(&s.x, &s.y, &[]) <= 1e-7);
            assert!((m.objective(&s.x, &s.y) - s.objective).abs() < 1e-8);
        }
    }
}

#[test]
fn random_polytope_membership_unchanged_by_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dim = 3;
    let mut rows = Vec::new();
    for k in 0..dim {
        rows.push(Halfspace::lower(dim, k, -1.0));
        rows.push(Halfspace::upper(dim, k, 1.0));
    }
    for _ in 0..25 {
        let e: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = -rng.gen_range(0.3..2.0);
        rows.push(Halfspace::new(e, f));
    }
    let reduced = remove_redundant(&rows, dim).unwrap();
    assert!(reduced.len() < rows.len());
    for _ in 0..1000 {
        let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.2..1.2)).collect();
        let a = rows.iter().all(|h| h.eval(&p) <= 0.0);
        let b = reduced.iter().all(|h| h.eval(&p) <= 0.0);
        let margin = rows
            .iter()
            .map(|h| h.eval(&p).abs())
            .fold(f64::INFINITY, f64::min);
        if margin > 1e-9 {
            assert_eq!(a, b);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solves_are_deterministic(seed in 0u64..10_000) {
        let m = common::random_milp(seed, 3, 5, 4);
        let s1 = solve_milp(&m, &[], &[]).unwrap();
        let s2 = solve_milp(&m, &[], &[]).unwrap();
        prop_assert_eq!(s1.status, s2.status);
        prop_assert_eq!(s1.objective.to_bits(), s2.objective.to_bits());
        prop_assert_eq!(s1.y, s2.y);
    }

    #[test]
    fn lp_duals_nonnegative_and_tight(seed in 0u64..10_000) {
        let (mut a, mut b, c) = random_lp(seed, 4, 5);
        bounded(&mut a, &mut b, 5);
        let model = dense_model(&a, &b, &c);
        let s = solve_lp(&model, &[], None).unwrap();
        prop_assert!(s.is_optimal());
        prop_assert!(s.duals.iter().all(|&y| y >= -1e-9));
        let dual_obj: f64 = s.duals.iter().zip(&b).map(|(y, r)| y * r).sum();
        prop_assert!((dual_obj - s.objective).abs() <= 1e-8 * (1.0 + s.objective.abs()));
    }
}
