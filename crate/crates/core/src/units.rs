//! Power-curve formulations shared by every model builder: segment binaries
//! in general, plain incremental segments for concave curves through the
//! origin.

use crate::solver::{LinExpr, ModelBuilder, VarId};
use crate::system::{HydroUnit, Segment};

#[derive(Clone, Debug)]
pub struct SegmentVars {
    /// `None` in the incremental form.
    pub on: Option<VarId>,
    pub delta: VarId,
    pub seg: Segment,
}

/// Either one binary per curve segment (at most one active, their sum is the
/// ON indicator) with the distance travelled along the active segment, or
/// segments filled in order without binaries.
#[derive(Clone, Debug)]
pub struct UnitVars {
    pub segs: Vec<SegmentVars>,
}

impl UnitVars {
    /// Discharge, m³/s.
    pub fn discharge(&self) -> LinExpr<f64> {
        let mut e = LinExpr::new();
        for s in &self.segs {
            if let Some(on) = s.on {
                e.add(on, s.seg.d0);
            }
            e.add(s.delta, 1.0);
        }
        e
    }

    /// Power, MW.
    pub fn power(&self) -> LinExpr<f64> {
        let mut e = LinExpr::new();
        for s in &self.segs {
            if let Some(on) = s.on {
                e.add(on, s.seg.p0);
            }
            e.add(s.delta, s.seg.slope);
        }
        e
    }

    pub fn has_binaries(&self) -> bool {
        self.segs.iter().any(|s| s.on.is_some())
    }

    /// ON indicator; empty in the incremental form.
    pub fn on(&self) -> LinExpr<f64> {
        let mut e = LinExpr::new();
        for s in &self.segs {
            if let Some(on) = s.on {
                e.add(on, 1.0);
            }
        }
        e
    }

    /// `(D, I, P)` at a solution; without binaries `I` is 1 when discharging.
    pub fn values(&self, x: &[f64], y: &[f64]) -> (f64, f64, f64) {
        let d = self.discharge().eval(x, y, &[]);
        let on = if self.has_binaries() {
            self.on().eval(x, y, &[])
        } else {
            f64::from(d > 1e-9)
        };
        (d, on, self.power().eval(x, y, &[]))
    }
}

/// Nonincreasing slopes from `(0, 0)` and no minimum output: filling the
/// segments in order is optimal whenever power is rewarded, so the binaries
/// can be dropped.
pub fn is_incremental(unit: &HydroUnit) -> bool {
    let curve = unit.operating_curve();
    let segs = curve.segments();
    let starts_at_origin = curve
        .breakpoints
        .first()
        .map_or(false, |&(d, p)| d == 0.0 && p == 0.0);
    starts_at_origin && unit.p_min <= 0.0 && segs.windows(2).all(|w| w[1].slope <= w[0].slope)
}

/// Adds the curve variables and rows of `unit`; `tag` prefixes row and
/// column names.
pub fn add_unit(mb: &mut ModelBuilder<f64>, unit: &HydroUnit, tag: &str) -> UnitVars {
    let curve = unit.operating_curve();
    if is_incremental(unit) {
        let segs: Vec<SegmentVars> = curve
            .segments()
            .into_iter()
            .enumerate()
            .map(|(k, seg)| {
                let delta = mb.continuous(format!("dseg[{tag},{k}]"));
                mb.le(
                    &LinExpr::var(delta, 1.0),
                    &LinExpr::constant(seg.len),
                    format!("segment-length[{tag},{k}]"),
                );
                SegmentVars {
                    on: None,
                    delta,
                    seg,
                }
            })
            .collect();
        let u = UnitVars { segs };
        if power_cap_of_curve(&curve) > unit.p_max {
            mb.le(
                &u.power(),
                &LinExpr::constant(unit.p_max),
                format!("power-max[{tag}]"),
            );
        }
        return u;
    }
    let mut segs = Vec::new();
    for (k, seg) in curve.segments().into_iter().enumerate() {
        let on = mb.binary(format!("seg[{tag},{k}]"));
        let delta = mb.continuous(format!("dseg[{tag},{k}]"));
        let mut e = LinExpr::var(delta, 1.0);
        e.add(on, -seg.len);
        mb.le(
            &e,
            &LinExpr::constant(0.0),
            format!("segment-length[{tag},{k}]"),
        );
        segs.push(SegmentVars {
            on: Some(on),
            delta,
            seg,
        });
    }
    let u = UnitVars { segs };
    if u.segs.len() > 1 {
        mb.le(&u.on(), &LinExpr::constant(1.0), format!("unit-on[{tag}]"));
    }
    let p_hi = curve
        .breakpoints
        .iter()
        .map(|b| b.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let p_lo = curve
        .breakpoints
        .iter()
        .map(|b| b.1)
        .fold(f64::INFINITY, f64::min);
    if p_hi > unit.p_max {
        mb.le(
            &u.power(),
            &u.on().scaled(unit.p_max),
            format!("power-max[{tag}]"),
        );
    }
    if p_lo < unit.p_min {
        mb.le(
            &u.on().scaled(unit.p_min),
            &u.power(),
            format!("power-min[{tag}]"),
        );
    }
    u
}

fn power_cap_of_curve(curve: &crate::system::PiecewiseCurve) -> f64 {
    curve.breakpoints.iter().map(|b| b.1).fold(0.0, f64::max)
}

/// Upper bound on the unit's power when ON.
pub fn power_cap(unit: &HydroUnit) -> f64 {
    power_cap_of_curve(&unit.operating_curve()).min(unit.p_max)
}
