use std::fmt::Write;

use super::{Assignment, ChcDocument, LinTerm, SurfaceFormula};
use crate::lia::{DnfFormula, LinearPredicate};

fn term(t: &LinTerm, out: &mut String) {
    match t {
        LinTerm::Int(v) => write!(out, "{v}").unwrap(),
        LinTerm::Var(name) => out.push_str(name),
        LinTerm::Add(ts) => {
            out.push_str("(+");
            for t in ts {
                out.push(' ');
                term(t, out);
            }
            out.push(')');
        }
        LinTerm::Sub(a, b) => {
            out.push_str("(- ");
            term(a, out);
            if let Some(b) = b {
                out.push(' ');
                term(b, out);
            }
            out.push(')');
        }
        LinTerm::Mul(k, v) => write!(out, "(* {k} {v})").unwrap(),
    }
}

fn formula(f: &SurfaceFormula, out: &mut String) {
    match f {
        SurfaceFormula::True => out.push_str("true"),
        SurfaceFormula::False => out.push_str("false"),
        SurfaceFormula::And(parts) | SurfaceFormula::Or(parts) => {
            out.push_str(if matches!(f, SurfaceFormula::And(_)) {
                "(and"
            } else {
                "(or"
            });
            for p in parts {
                out.push(' ');
                formula(p, out);
            }
            out.push(')');
        }
        SurfaceFormula::Not(g) => {
            out.push_str("(not ");
            formula(g, out);
            out.push(')');
        }
        SurfaceFormula::Atom(op, l, r) => {
            write!(out, "({} ", op.symbol()).unwrap();
            term(l, out);
            out.push(' ');
            term(r, out);
            out.push(')');
        }
    }
}

pub fn print_formula(f: &SurfaceFormula) -> String {
    let mut out = String::new();
    formula(f, &mut out);
    out
}

fn assignments(map: &[Assignment], out: &mut String) {
    out.push('(');
    for (i, a) in map.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "({} ", a.var).unwrap();
        term(&a.term, out);
        out.push(')');
    }
    out.push(')');
}

/// Prints a document in the input syntax; `parse_chc` inverts it.
pub fn print_document(doc: &ChcDocument) -> String {
    let mut out = String::from("(chc\n");
    writeln!(out, "  (vars {})", doc.variables.join(" ")).unwrap();
    writeln!(out, "  (bound {})", doc.int_bound).unwrap();
    writeln!(out, "  (pre {})", print_formula(&doc.pre)).unwrap();
    writeln!(out, "  (guard {})", print_formula(&doc.guard)).unwrap();
    out.push_str("  (trans");
    for block in &doc.trans {
        write!(out, "\n    (block {}", print_formula(&block.guard)).unwrap();
        for map in &block.maps {
            out.push_str("\n      ");
            assignments(map, &mut out);
        }
        out.push(')');
    }
    out.push_str(")\n");
    writeln!(out, "  (post {}))", print_formula(&doc.post)).unwrap();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvariantFormat {
    /// `(x >= 1 && y >= 1) || (...)`
    DnfText,
    /// An SMT-LIB 2 Bool term.
    SmtlibTerm,
}

fn text_predicate(p: &LinearPredicate, vars: &[String]) -> String {
    let mut lhs = String::new();
    for (w, name) in p.coeffs.iter().zip(vars) {
        if *w == 0 {
            continue;
        }
        let (sign, mag) = if *w < 0 {
            ("-", w.unsigned_abs())
        } else {
            ("+", w.unsigned_abs())
        };
        if lhs.is_empty() {
            if sign == "-" {
                lhs.push('-');
            }
        } else {
            write!(lhs, " {sign} ").unwrap();
        }
        if mag == 1 {
            lhs.push_str(name);
        } else {
            write!(lhs, "{mag}*{name}").unwrap();
        }
    }
    if lhs.is_empty() {
        lhs.push('0');
    }
    format!("{lhs} <= {}", p.bound)
}

fn smt_predicate(p: &LinearPredicate, vars: &[String]) -> String {
    let terms: Vec<String> = p
        .coeffs
        .iter()
        .zip(vars)
        .filter(|(w, _)| **w != 0)
        .map(|(w, name)| {
            if *w == 1 {
                name.clone()
            } else {
                format!("(* {w} {name})")
            }
        })
        .collect();
    let lhs = match terms.len() {
        0 => "0".to_string(),
        1 => terms[0].clone(),
        _ => format!("(+ {})", terms.join(" ")),
    };
    format!("(<= {lhs} {})", p.bound)
}

/// Renders an invariant over the named variables.
pub fn serialize_invariant(inv: &DnfFormula, vars: &[String], format: InvariantFormat) -> String {
    if inv.is_false() {
        return "false".to_string();
    }
    match format {
        InvariantFormat::DnfText => inv
            .cubes()
            .iter()
            .map(|cube| {
                let preds: Vec<String> = cube
                    .predicates
                    .iter()
                    .map(|p| text_predicate(p, vars))
                    .collect();
                format!("({})", preds.join(" && "))
            })
            .collect::<Vec<_>>()
            .join(" || "),
        InvariantFormat::SmtlibTerm => {
            let mut out = String::from("(or");
            for cube in inv.cubes() {
                out.push_str(" (and");
                for p in &cube.predicates {
                    out.push(' ');
                    out.push_str(&smt_predicate(p, vars));
                }
                out.push(')');
            }
            out.push(')');
            out
        }
    }
}
