//! Physical description of a cascade: reservoirs, units, power curves.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hours per week.
pub const LAMBDA: f64 = 168.0;
/// Mm³ moved by 1 m³/s sustained for one week.
pub const ALPHA: f64 = 0.6048;

/// Discharge (m³/s) to power (MW) map by linear interpolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseCurve {
    pub breakpoints: Vec<(f64, f64)>,
}

/// One linear piece `[d0, d0 + len]` with power `p0 + slope·(d − d0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub d0: f64,
    pub p0: f64,
    pub len: f64,
    pub slope: f64,
}

impl PiecewiseCurve {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Self {
        Self { breakpoints }
    }

    /// Straight line `P = k·D` on `[0, d_max]`.
    pub fn linear(k: f64, d_max: f64) -> Self {
        Self::new(vec![(0.0, 0.0), (d_max, k * d_max)])
    }

    pub fn domain(&self) -> (f64, f64) {
        let first = self.breakpoints.first().map_or(f64::NAN, |b| b.0);
        let last = self.breakpoints.last().map_or(f64::NAN, |b| b.0);
        (first, last)
    }

    pub fn segments(&self) -> Vec<Segment> {
        self.breakpoints
            .windows(2)
            .map(|w| {
                let (d0, p0) = w[0];
                let (d1, p1) = w[1];
                Segment {
                    d0,
                    p0,
                    len: d1 - d0,
                    slope: (p1 - p0) / (d1 - d0),
                }
            })
            .collect()
    }

    pub fn max_slope(&self) -> f64 {
        self.segments().iter().map(|s| s.slope).fold(0.0, f64::max)
    }

    /// Largest `P/D` ratio over the breakpoints (the curve's best efficiency
    /// when it passes through the origin).
    pub fn max_ratio(&self) -> f64 {
        let mut best = self.max_slope();
        for &(d, p) in &self.breakpoints {
            if d > 0.0 {
                best = best.max(p / d);
            }
        }
        best
    }

    fn rule_violations(&self, owner: &str) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.breakpoints.len() < 2 {
            out.push(Violation::new(
                owner,
                "curve-breakpoints",
                "fewer than 2 breakpoints",
            ));
            return out;
        }
        for w in self.breakpoints.windows(2) {
            if !(w[1].0 > w[0].0) {
                out.push(Violation::new(
                    owner,
                    "curve-order",
                    format!("discharge {} does not exceed {}", w[1].0, w[0].0),
                ));
            }
            if w[1].1 < w[0].1 {
                out.push(Violation::new(
                    owner,
                    "curve-monotone",
                    format!("power drops from {} to {}", w[0].1, w[1].1),
                ));
            }
        }
        if self
            .breakpoints
            .iter()
            .any(|&(d, p)| !d.is_finite() || !p.is_finite())
            || self.segments().iter().any(|s| !s.slope.is_finite())
        {
            out.push(Violation::new(
                owner,
                "curve-finite",
                "non-finite breakpoint or slope",
            ));
        }
        out
    }
}

/// Power output of `curve` at discharge `d`.
pub fn curve_power(curve: &PiecewiseCurve, d: f64) -> Result<f64> {
    let (lo, hi) = curve.domain();
    if curve.breakpoints.len() < 2 || !(d >= lo && d <= hi) {
        return Err(Error::Domain(format!(
            "discharge {d} outside curve domain [{lo}, {hi}]"
        )));
    }
    for w in curve.breakpoints.windows(2) {
        let (d0, p0) = w[0];
        let (d1, p1) = w[1];
        if d == d0 {
            return Ok(p0);
        }
        if d == d1 {
            return Ok(p1);
        }
        if d > d0 && d < d1 {
            return Ok(p0 + (p1 - p0) * (d - d0) / (d1 - d0));
        }
    }
    Err(Error::Domain(format!("discharge {d} not bracketed")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HydroUnit {
    pub id: String,
    pub p_min: f64,
    pub p_max: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub curve: PiecewiseCurve,
}

impl HydroUnit {
    /// Unit whose curve is `P = k·D` on `[0, d_max]`.
    pub fn linear(id: impl Into<String>, k: f64, d_max: f64) -> Self {
        Self {
            id: id.into(),
            p_min: 0.0,
            p_max: k * d_max,
            d_min: 0.0,
            d_max,
            curve: PiecewiseCurve::linear(k, d_max),
        }
    }

    /// Curve breakpoints clipped to `[d_min, d_max]`.
    pub fn operating_curve(&self) -> PiecewiseCurve {
        let mut pts = Vec::new();
        let lo = self.d_min;
        let hi = self.d_max;
        if let Ok(p) = curve_power(&self.curve, lo) {
            pts.push((lo, p));
        }
        for &(d, p) in &self.curve.breakpoints {
            if d > lo && d < hi {
                pts.push((d, p));
            }
        }
        if hi > lo {
            if let Ok(p) = curve_power(&self.curve, hi) {
                pts.push((hi, p));
            }
        }
        PiecewiseCurve::new(pts)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reservoir {
    pub id: String,
    pub v_min: f64,
    pub v_max: f64,
    /// C_ws, MWh per Mm³ spilled.
    pub spill_penalty: f64,
    pub units: Vec<HydroUnit>,
    #[serde(default)]
    pub direct_upstream: Vec<String>,
}

impl Reservoir {
    /// Maximum release rate summed over units, m³/s.
    pub fn max_discharge(&self) -> f64 {
        self.units.iter().map(|u| u.d_max).sum()
    }

    pub fn max_power(&self) -> f64 {
        self.units.iter().map(|u| u.p_max).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeSystem {
    pub reservoirs: Vec<Reservoir>,
    /// δ, weeks of travel time between a reservoir and its downstream neighbour.
    #[serde(default)]
    pub delay: u32,
}

impl CascadeSystem {
    pub fn lambda(&self) -> f64 {
        LAMBDA
    }

    pub fn alpha(&self) -> f64 {
        ALPHA
    }

    pub fn len(&self) -> usize {
        self.reservoirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reservoirs.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.reservoirs.iter().position(|r| r.id == id)
    }

    /// Upstream sets as reservoir indices; unknown ids are skipped.
    pub fn upstream_indices(&self) -> Vec<Vec<usize>> {
        self.reservoirs
            .iter()
            .map(|r| {
                r.direct_upstream
                    .iter()
                    .filter_map(|u| self.index_of(u))
                    .collect()
            })
            .collect()
    }

    pub fn v_min(&self) -> Vec<f64> {
        self.reservoirs.iter().map(|r| r.v_min).collect()
    }

    pub fn v_max(&self) -> Vec<f64> {
        self.reservoirs.iter().map(|r| r.v_max).collect()
    }

    /// Energy per Mm³ of the most efficient unit in the system, MWh/Mm³.
    pub fn max_energy_rate(&self) -> f64 {
        self.reservoirs
            .iter()
            .flat_map(|r| r.units.iter())
            .map(|u| LAMBDA * u.curve.max_ratio() / ALPHA)
            .fold(0.0, f64::max)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let sys: CascadeSystem = serde_json::from_str(s)?;
        let v = validate_system(&sys);
        if v.is_empty() {
            Ok(sys)
        } else {
            Err(Error::Invalid(v))
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(&path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system serializes")
    }
}

/// Per-reservoir storage levels, Mm³.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StorageVector(pub Vec<f64>);

impl StorageVector {
    pub fn fits(&self, system: &CascadeSystem) -> bool {
        self.0.len() == system.len()
    }

    pub fn is_feasible(&self, system: &CascadeSystem, tol: f64) -> bool {
        self.fits(system)
            && self
                .0
                .iter()
                .zip(&system.reservoirs)
                .all(|(&v, r)| v >= r.v_min - tol && v <= r.v_max + tol)
    }

    pub fn mid_box(system: &CascadeSystem) -> Self {
        Self(
            system
                .reservoirs
                .iter()
                .map(|r| 0.5 * (r.v_min + r.v_max))
                .collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub entity: String,
    pub rule: String,
    pub detail: String,
}

impl Violation {
    fn new(entity: impl Into<String>, rule: &str, detail: impl Into<String>) -> Self {
        Self {
            entity: entity.into(),
            rule: rule.to_string(),
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.entity, self.rule, self.detail)
    }
}

fn unit_violations(res: &str, u: &HydroUnit) -> Vec<Violation> {
    let owner = format!("{res}/{}", u.id);
    let mut out = Vec::new();
    if !(u.p_min >= 0.0 && u.p_min <= u.p_max) {
        out.push(Violation::new(
            &owner,
            "power-bounds",
            format!("need 0 ≤ {} ≤ {}", u.p_min, u.p_max),
        ));
    }
    if !(u.d_min >= 0.0 && u.d_min <= u.d_max) {
        out.push(Violation::new(
            &owner,
            "discharge-bounds",
            format!("need 0 ≤ {} ≤ {}", u.d_min, u.d_max),
        ));
    }
    let curve = u.curve.rule_violations(&owner);
    if curve.is_empty() {
        let (lo, hi) = u.curve.domain();
        if lo > u.d_min || hi < u.d_max {
            out.push(Violation::new(
                &owner,
                "curve-domain",
                format!(
                    "curve covers [{lo}, {hi}], unit needs [{}, {}]",
                    u.d_min, u.d_max
                ),
            ));
        }
    }
    out.extend(curve);
    out
}

/// Every broken invariant of the system; empty when the system is usable.
pub fn validate_system(system: &CascadeSystem) -> Vec<Violation> {
    let mut out = Vec::new();
    if system.reservoirs.is_empty() {
        out.push(Violation::new("system", "non-empty", "no reservoirs"));
    }
    let mut seen = HashMap::new();
    for (k, r) in system.reservoirs.iter().enumerate() {
        if seen.insert(r.id.as_str(), k).is_some() {
            out.push(Violation::new(&r.id, "unique-id", "duplicate reservoir id"));
        }
    }
    for r in &system.reservoirs {
        if !(r.v_min >= 0.0 && r.v_min < r.v_max) {
            out.push(Violation::new(
                &r.id,
                "storage-bounds",
                format!("need 0 ≤ v_min < v_max, got [{}, {}]", r.v_min, r.v_max),
            ));
        }
        if !(r.spill_penalty >= 0.0) {
            out.push(Violation::new(&r.id, "spill-penalty", "C_ws must be ≥ 0"));
        }
        for u in &r.units {
            out.extend(unit_violations(&r.id, u));
        }
        for up in &r.direct_upstream {
            if !seen.contains_key(up.as_str()) {
                out.push(Violation::new(
                    &r.id,
                    "topology",
                    format!("unknown upstream reservoir {up}"),
                ));
            } else if up == &r.id {
                out.push(Violation::new(
                    &r.id,
                    "topology",
                    "reservoir lists itself upstream",
                ));
            }
        }
    }
    if let Err(cycle) = order_ids(system) {
        out.push(Violation::new(
            "system",
            "topology",
            format!("upstream cycle through {cycle}"),
        ));
    }
    out
}

fn order_ids(system: &CascadeSystem) -> std::result::Result<Vec<usize>, String> {
    let n = system.len();
    let ups = system.upstream_indices();
    let mut indeg: Vec<usize> = ups.iter().map(|u| u.len()).collect();
    let mut down: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, u) in ups.iter().enumerate() {
        for &m in u {
            down.entry(m).or_default().push(k);
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&k| indeg[k] == 0).collect();
    ready.reverse();
    let mut order = Vec::with_capacity(n);
    while let Some(k) = ready.pop() {
        order.push(k);
        if let Some(ds) = down.get(&k) {
            for &d in ds {
                indeg[d] -= 1;
                if indeg[d] == 0 {
                    ready.push(d);
                }
            }
            // smallest file index next
            ready.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        let stuck = (0..n)
            .find(|&k| indeg[k] > 0)
            .map_or_else(String::new, |k| system.reservoirs[k].id.clone());
        Err(stuck)
    }
}

/// Reservoir ids, every reservoir after all of its direct upstream ones.
pub fn topological_order(system: &CascadeSystem) -> Result<Vec<String>> {
    order_ids(system)
        .map(|o| {
            o.into_iter()
                .map(|k| system.reservoirs[k].id.clone())
                .collect()
        })
        .map_err(|c| Error::Domain(format!("upstream cycle through {c}")))
}

/// Index form of [`topological_order`].
pub fn topological_indices(system: &CascadeSystem) -> Result<Vec<usize>> {
    order_ids(system).map_err(|c| Error::Domain(format!("upstream cycle through {c}")))
}
