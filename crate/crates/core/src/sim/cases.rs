//! Seeded synthetic cascades.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::forecast::{SeasonProfile, TruthProcess};
use crate::system::{CascadeSystem, HydroUnit, PiecewiseCurve, Reservoir, ALPHA, LAMBDA};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    TwoReservoir,
    EightReservoir,
}

impl std::str::FromStr for CaseKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two_reservoir" | "two" => Ok(Self::TwoReservoir),
            "eight_reservoir" | "eight" => Ok(Self::EightReservoir),
            other => Err(format!("unknown case `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub kind: CaseKind,
    pub system: CascadeSystem,
    pub truth: TruthProcess,
    pub initial_storage: Vec<f64>,
    /// Suggested future-period resolution.
    pub omega: f64,
}

/// Concave two-segment curve through the origin.
fn concave_unit(id: String, k1: f64, k2: f64, d_break: f64, d_max: f64) -> HydroUnit {
    let p1 = k1 * d_break;
    let p2 = p1 + k2 * (d_max - d_break);
    HydroUnit {
        id,
        p_min: 0.0,
        p_max: p2,
        d_min: 0.0,
        d_max,
        curve: PiecewiseCurve::new(vec![(0.0, 0.0), (d_break, p1), (d_max, p2)]),
    }
}

fn jitter(rng: &mut ChaCha8Rng, v: f64, rel: f64) -> f64 {
    v * (1.0 + rng.gen_range(-rel..rel))
}

/// Spill penalty ten times the best energy rate of the system, MWh/Mm³.
fn spill_penalty(reservoirs: &[Reservoir]) -> f64 {
    let best = reservoirs
        .iter()
        .flat_map(|r| r.units.iter())
        .map(|u| u.operating_curve().max_ratio())
        .fold(0.0, f64::max);
    10.0 * LAMBDA * best / ALPHA
}

fn two_reservoir(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut units = |prefix: &str, k: f64, d: [f64; 3]| -> Vec<HydroUnit> {
        d.iter()
            .enumerate()
            .map(|(i, &dm)| {
                let dm = jitter(&mut rng, dm, 0.05);
                let k1 = jitter(&mut rng, k, 0.03);
                let k2 = k1 * rng.gen_range(0.8..0.9);
                concave_unit(format!("{prefix}{}", i + 1), k1, k2, 0.6 * dm, dm)
            })
            .collect()
    };
    let rb_units = units("RB-G", 1.05, [60.0, 55.0, 50.0]);
    let pt_units = units("PT-G", 0.45, [70.0, 65.0, 60.0]);
    let mut reservoirs = vec![
        Reservoir {
            id: "RB".into(),
            v_min: 262.45,
            v_max: 338.26,
            spill_penalty: 0.0,
            units: rb_units,
            direct_upstream: vec![],
        },
        Reservoir {
            id: "PT".into(),
            v_min: 1.30,
            v_max: 3.66,
            spill_penalty: 0.0,
            units: pt_units,
            direct_upstream: vec!["RB".into()],
        },
    ];
    let c = spill_penalty(&reservoirs);
    reservoirs.iter_mut().for_each(|r| r.spill_penalty = c);
    Case {
        kind: CaseKind::TwoReservoir,
        system: CascadeSystem {
            reservoirs,
            delay: 0,
        },
        truth: TruthProcess {
            profile: SeasonProfile {
                cv: CASE_CV,
                ..SeasonProfile::new("base", vec![40.0, 1.5])
            },
            seed,
        },
        initial_storage: vec![319.53, 2.85],
        omega: 0.75,
    }
}

/// Weekly inflow coefficient of variation of both synthetic cases; narrow
/// enough that the chance bands fit inside the storage boxes.
pub const CASE_CV: f64 = 0.08;

/// Local inflow of every reservoir in the eight-reservoir chain, Mm³/week.
pub const EIGHT_LOCAL_INFLOW: f64 = 3.0;

fn eight_reservoir(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reservoirs = Vec::with_capacity(8);
    for n in 0..8 {
        // mean rate reaching unit n: local plus everything upstream
        let rate = EIGHT_LOCAL_INFLOW * (n + 1) as f64 / ALPHA;
        let k1 = jitter(&mut rng, 1.0, 0.05);
        let k2 = 0.6 * k1;
        let unit = concave_unit(format!("G{}", n + 1), k1, k2, rate, 2.5 * rate);
        reservoirs.push(Reservoir {
            id: format!("R{}", n + 1),
            v_min: 5.0,
            v_max: 9.0,
            spill_penalty: 0.0,
            units: vec![unit],
            direct_upstream: if n == 0 {
                vec![]
            } else {
                vec![format!("R{n}")]
            },
        });
    }
    let c = spill_penalty(&reservoirs);
    reservoirs.iter_mut().for_each(|r| r.spill_penalty = c);
    let mut profile = SeasonProfile::new("base", vec![EIGHT_LOCAL_INFLOW; 8]);
    profile.amplitude = 0.0;
    profile.cv = CASE_CV;
    Case {
        kind: CaseKind::EightReservoir,
        system: CascadeSystem {
            reservoirs,
            delay: 0,
        },
        truth: TruthProcess { profile, seed },
        initial_storage: vec![7.0; 8],
        omega: 0.5,
    }
}

pub fn generate_case(kind: CaseKind, seed: u64) -> Case {
    match kind {
        CaseKind::TwoReservoir => two_reservoir(seed),
        CaseKind::EightReservoir => eight_reservoir(seed),
    }
}
