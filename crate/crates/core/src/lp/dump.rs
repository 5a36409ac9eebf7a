//! CPLEX LP text format, for cross-checking instances with external solvers.

use std::fmt::Write as _;

use super::simplex::{LinearProgram, Relation};

fn name(lp: &LinearProgram, j: usize) -> String {
    lp.names.get(j).cloned().unwrap_or_else(|| format!("x{j}"))
}

fn term(out: &mut String, coeff: f64, var: &str, first: bool) {
    let sign = if coeff < 0.0 {
        " -"
    } else if first {
        ""
    } else {
        " +"
    };
    let mag = coeff.abs();
    if mag == 1.0 {
        let _ = write!(out, "{sign} {var}");
    } else {
        let _ = write!(out, "{sign} {mag:e} {var}");
    }
}

/// Renders `lp` as a minimization in CPLEX LP format. All variables are
/// nonnegative, which is the format's default bound.
pub fn to_cplex_lp(lp: &LinearProgram) -> String {
    let mut out = String::from("Minimize\n obj:");
    let mut first = true;
    for (j, &c) in lp.objective.iter().enumerate() {
        if c != 0.0 {
            term(&mut out, c, &name(lp, j), first);
            first = false;
        }
    }
    if first {
        out.push_str(" 0");
    }
    out.push_str("\nSubject To\n");
    for (r, row) in lp.rows.iter().enumerate() {
        let _ = write!(out, " c{r}:");
        let mut first = true;
        for &(j, c) in &row.terms {
            if c != 0.0 {
                term(&mut out, c, &name(lp, j), first);
                first = false;
            }
        }
        if first {
            out.push_str(" 0 x0");
        }
        let op = match row.relation {
            Relation::Eq => "=",
            Relation::Le => "<=",
        };
        let _ = writeln!(out, " {op} {:e}", row.rhs);
    }
    out.push_str("End\n");
    out
}
