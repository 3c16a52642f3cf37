//! Human-readable LP-style listing of a parametric model.

use std::fmt::Write as _;

use super::{ParametricMilp, RowSense};
use crate::scalar::Scalar;

fn term<S: Scalar>(out: &mut String, first: &mut bool, coeff: S, name: &str) {
    if coeff == S::zero() {
        return;
    }
    let sign = if coeff < S::zero() { "-" } else { "+" };
    if *first && coeff >= S::zero() {
        let _ = write!(out, "{} {}", coeff.abs(), name);
    } else {
        let _ = write!(out, " {} {} {}", sign, coeff.abs(), name);
    }
    *first = false;
}

/// Objective, tagged rows (with the `θ` terms kept symbolic) and the binary list.
pub fn to_lp_text<S: Scalar>(model: &ParametricMilp<S>) -> String {
    let mut out = String::from("maximize\n  obj: ");
    let mut first = true;
    for (j, &c) in model.c.iter().enumerate() {
        term(&mut out, &mut first, c, &model.x_names[j]);
    }
    for (j, &d) in model.d.iter().enumerate() {
        term(&mut out, &mut first, d, &model.y_names[j]);
    }
    if first {
        out.push('0');
    }
    out.push_str("\nsubject to\n");
    let thetas: Vec<String> = (0..model.theta_dim())
        .map(|k| format!("theta[{k}]"))
        .collect();
    for i in 0..model.rows() {
        let _ = write!(out, "  {}: ", model.row_tags[i]);
        let mut first = true;
        for (j, &a) in model.a.row(i).iter().enumerate() {
            term(&mut out, &mut first, a, &model.x_names[j]);
        }
        for (j, &e) in model.e.row(i).iter().enumerate() {
            term(&mut out, &mut first, e, &model.y_names[j]);
        }
        for (k, name) in thetas.iter().enumerate() {
            term(&mut out, &mut first, -model.f[(i, k)], name);
        }
        if first {
            out.push('0');
        }
        let op = match model.sense[i] {
            RowSense::Le => "<=",
            RowSense::Eq => "=",
        };
        let _ = writeln!(out, " {} {}", op, model.b[i]);
    }
    out.push_str("binary\n");
    for name in &model.y_names {
        let _ = writeln!(out, "  {name}");
    }
    out.push_str("end\n");
    out
}
