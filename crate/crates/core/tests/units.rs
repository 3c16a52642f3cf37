mod common;

use carryover_core::solver::{solve_milp, LinExpr, ModelBuilder};
use carryover_core::system::{curve_power, HydroUnit, PiecewiseCurve};
use carryover_core::units::{add_unit, is_incremental, power_cap};
use proptest::prelude::*;

fn unit_from(points: Vec<(f64, f64)>, p_min: f64) -> HydroUnit {
    let d_max = points.last().unwrap().0;
    let p_max = points.iter().map(|p| p.1).fold(0.0, f64::max);
    HydroUnit {
        id: "g".into(),
        p_min,
        p_max,
        d_min: points[0].0,
        d_max,
        curve: PiecewiseCurve::new(points),
    }
}

/// Best power at discharge `d` through the model rows.
fn max_power_at(unit: &HydroUnit, d: f64) -> Option<f64> {
    let mut mb = ModelBuilder::new(0);
    let u = add_unit(&mut mb, unit, "g");
    mb.eq(&u.discharge(), &LinExpr::constant(d), "fix");
    mb.add_objective_expr(&u.power());
    let m = mb.build();
    let s = solve_milp(&m, &[], &[]).unwrap();
    s.is_optimal().then_some(s.objective)
}

#[test]
fn concave_units_need_no_binaries() {
    let c = common::concave_unit("g", 2.0, 1.0, 5.0, 10.0);
    assert!(is_incremental(&c));
    let mut mb = ModelBuilder::new(0);
    add_unit(&mut mb, &c, "g");
    assert_eq!(mb.build().q(), 0);
    assert!((power_cap(&c) - 15.0).abs() < 1e-12);

    // convex kink keeps the segment binaries
    let v = unit_from(vec![(0.0, 0.0), (5.0, 5.0), (10.0, 20.0)], 0.0);
    assert!(!is_incremental(&v));
    let mut mb = ModelBuilder::new(0);
    add_unit(&mut mb, &v, "g");
    assert_eq!(mb.build().q(), 2);
}

#[test]
fn minimum_output_forces_binaries() {
    let u = unit_from(vec![(0.0, 0.0), (10.0, 20.0)], 4.0);
    assert!(!is_incremental(&u));
    // between 0 and the discharge giving p_min the unit cannot run
    assert!(max_power_at(&u, 1.0).is_none());
    assert!((max_power_at(&u, 0.0).unwrap()).abs() < 1e-9);
    assert!((max_power_at(&u, 3.0).unwrap() - 6.0).abs() < 1e-9);
}

fn curve_points() -> impl Strategy<Value = Vec<(f64, f64)>> {
    (
        1usize..4,
        prop::collection::vec((0.5f64..5.0, 0.1f64..3.0), 3),
        0.0f64..2.0,
    )
        .prop_map(|(k, segs, d0)| {
            let mut pts = vec![(d0, if d0 > 0.0 { 0.5 * d0 } else { 0.0 })];
            for (len, slope) in segs.into_iter().take(k) {
                let (d, p) = *pts.last().unwrap();
                pts.push((d + len, p + slope * len));
            }
            pts
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn model_power_equals_curve(pts in curve_points(), frac in 0.0f64..1.0) {
        let u = unit_from(pts.clone(), 0.0);
        let (lo, hi) = (pts[0].0, pts.last().unwrap().0);
        let d = lo + frac * (hi - lo);
        let want = curve_power(&u.curve, d).unwrap();
        let got = max_power_at(&u, d).unwrap();
        prop_assert!((got - want).abs() < 1e-7 * (1.0 + want.abs()), "d={d} got {got} want {want}");
        // off is always available
        prop_assert!(max_power_at(&u, 0.0).unwrap().abs() < 1e-9);
    }
}
