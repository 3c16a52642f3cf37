//! Post-pass joining regions that share binaries and value piece whenever
//! their union is convex.

use super::mplp::{interior, Tolerances};
use super::CriticalRegion;
use crate::error::Result;
use crate::solver::{Halfspace, Polytope};

const VALID: f64 = 1e-9;

fn same_piece(a: &CriticalRegion, b: &CriticalRegion) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * (1.0 + x.abs().max(y.abs()));
    a.y_star == b.y_star
        && close(a.value.g, b.value.g)
        && a.value.a.iter().zip(&b.value.a).all(|(&x, &y)| close(x, y))
}

fn max_over(p: &Polytope<f64>, h: &Halfspace<f64>) -> Result<Option<f64>> {
    Ok(p.maximize(&h.e)?.map(|(v, _)| v + h.f))
}

/// Envelope of the two polytopes if it equals their union.
fn convex_union(a: &Polytope<f64>, b: &Polytope<f64>) -> Result<Option<Polytope<f64>>> {
    let mut env = Vec::new();
    let mut outside_a = Vec::new();
    for h in &a.ineqs {
        match max_over(b, h)? {
            Some(v) if v <= VALID => env.push(h.clone()),
            _ => outside_a.push(h.clone()),
        }
    }
    for h in &b.ineqs {
        if matches!(max_over(a, h)?, Some(v) if v <= VALID) {
            env.push(h.clone());
        }
    }
    let env = Polytope::new(a.dim, env);
    // env ⊆ a ∪ b  ⇔  every part of env outside a lies in b
    for h in &outside_a {
        let part = env.with(h.flipped());
        for g in &b.ineqs {
            if let Some(v) = max_over(&part, g)? {
                if v > VALID {
                    return Ok(None);
                }
            }
        }
    }
    Ok(Some(env))
}

pub(crate) fn merge_regions(
    mut regions: Vec<CriticalRegion>,
    tol: &Tolerances,
) -> Result<Vec<CriticalRegion>> {
    let mut i = 0;
    while i < regions.len() {
        let mut merged = false;
        let mut j = i + 1;
        while j < regions.len() {
            if same_piece(&regions[i], &regions[j]) {
                let pa = Polytope::new(
                    regions[i].ineqs.first().map_or(0, |h| h.e.len()),
                    regions[i].ineqs.clone(),
                );
                let pb = Polytope::new(pa.dim, regions[j].ineqs.clone());
                if let Some(env) = convex_union(&pa, &pb)? {
                    let env = env.reduced()?;
                    if let Some((center, radius)) = interior(&env, tol)? {
                        let other = regions.remove(j);
                        let r = &mut regions[i];
                        r.ineqs = env.ineqs;
                        r.center = center;
                        r.radius = radius;
                        r.dual_degenerate |= other.dual_degenerate;
                        merged = true;
                        continue;
                    }
                }
            }
            j += 1;
        }
        if !merged {
            i += 1;
        }
    }
    Ok(regions)
}
