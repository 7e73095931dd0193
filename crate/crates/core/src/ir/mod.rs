//! Textual input format for single-loop CHC systems.
//!
//! ```text
//! (chc
//!   (vars x y)
//!   (bound 64)
//!   (pre (and (= x 1) (= y 1)))
//!   (guard true)
//!   (trans (block true ((x (+ x y)) (y (+ x y)))))
//!   (post (>= y 1)))
//! ```
//!
//! Documents are parsed into a surface AST ([`ChcDocument`]), normalized to
//! DNF with [`to_dnf`], and lowered to a [`ChcSystem`](crate::lia::ChcSystem)
//! with [`lower_document`].

mod lower;
mod parse;
mod print;

pub use lower::{lower_document, lower_document_with_warnings, LowerError};
pub use parse::{parse_chc, parse_chc_with_warnings, parse_formula, ParseError};
pub use print::{print_document, print_formula, serialize_invariant, InvariantFormat};

use serde::{Deserialize, Serialize};

use crate::lia::{Cube, DnfFormula, LiaError, LinearPredicate};

/// Bound used when a document has no `(bound N)` section.
pub const DEFAULT_INT_BOUND: i64 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinTerm {
    Int(i64),
    Var(String),
    Add(Vec<LinTerm>),
    /// `(- a)` or `(- a b)`.
    Sub(Box<LinTerm>, Option<Box<LinTerm>>),
    Mul(i64, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Le,
    Lt,
    Gt,
    Ge,
    Eq,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "<=" => CmpOp::Le,
            "<" => CmpOp::Lt,
            ">" => CmpOp::Gt,
            ">=" => CmpOp::Ge,
            "=" => CmpOp::Eq,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurfaceFormula {
    True,
    False,
    And(Vec<SurfaceFormula>),
    Or(Vec<SurfaceFormula>),
    Not(Box<SurfaceFormula>),
    Atom(CmpOp, LinTerm, LinTerm),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub var: String,
    pub term: LinTerm,
}

/// A guarded branch of the loop body. Each entry of `maps` is one
/// nondeterministic choice of simultaneous assignments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransBlock {
    pub guard: SurfaceFormula,
    pub maps: Vec<Vec<Assignment>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChcDocument {
    pub variables: Vec<String>,
    pub int_bound: i64,
    pub pre: SurfaceFormula,
    pub guard: SurfaceFormula,
    pub trans: Vec<TransBlock>,
    pub post: SurfaceFormula,
}

/// A linear term `coeffs·x + constant`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineForm {
    pub coeffs: Vec<i64>,
    pub constant: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TermError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("integer overflow while normalizing a linear term")]
    Overflow,
}

impl AffineForm {
    fn zero(n: usize) -> Self {
        Self {
            coeffs: vec![0; n],
            constant: 0,
        }
    }

    fn add(&self, other: &AffineForm) -> Result<Self, TermError> {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.checked_add(*b).ok_or(TermError::Overflow))
            .collect::<Result<_, _>>()?;
        let constant = self
            .constant
            .checked_add(other.constant)
            .ok_or(TermError::Overflow)?;
        Ok(Self { coeffs, constant })
    }

    fn neg(&self) -> Result<Self, TermError> {
        let coeffs = self
            .coeffs
            .iter()
            .map(|a| a.checked_neg().ok_or(TermError::Overflow))
            .collect::<Result<_, _>>()?;
        let constant = self.constant.checked_neg().ok_or(TermError::Overflow)?;
        Ok(Self { coeffs, constant })
    }
}

fn var_index(vars: &[String], name: &str) -> Result<usize, TermError> {
    vars.iter()
        .position(|v| v == name)
        .ok_or_else(|| TermError::UnknownVariable(name.to_string()))
}

/// Normalizes a linear term over `vars`.
pub fn affine_form(term: &LinTerm, vars: &[String]) -> Result<AffineForm, TermError> {
    let n = vars.len();
    match term {
        LinTerm::Int(v) => Ok(AffineForm {
            coeffs: vec![0; n],
            constant: *v,
        }),
        LinTerm::Var(name) => {
            let mut f = AffineForm::zero(n);
            f.coeffs[var_index(vars, name)?] = 1;
            Ok(f)
        }
        LinTerm::Add(terms) => terms.iter().try_fold(AffineForm::zero(n), |acc, t| {
            acc.add(&affine_form(t, vars)?)
        }),
        LinTerm::Sub(a, None) => affine_form(a, vars)?.neg(),
        LinTerm::Sub(a, Some(b)) => affine_form(a, vars)?.add(&affine_form(b, vars)?.neg()?),
        LinTerm::Mul(k, name) => {
            let mut f = AffineForm::zero(n);
            f.coeffs[var_index(vars, name)?] = *k;
            Ok(f)
        }
    }
}

/// Rewrites one comparison into `<=` predicates.
///
/// With `lhs - rhs = w·x + k` and `b = -k`: `=` gives `w·x <= b` and
/// `-w·x <= -b`; `<` gives `w·x <= b - 1`; `>` gives `-w·x <= -b - 1`;
/// `>=` gives `-w·x <= -b`.
pub fn desugar_atom(
    op: CmpOp,
    lhs: &LinTerm,
    rhs: &LinTerm,
    vars: &[String],
) -> Result<Vec<LinearPredicate>, TermError> {
    let diff = affine_form(lhs, vars)?.add(&affine_form(rhs, vars)?.neg()?)?;
    let w = diff.coeffs;
    let b = diff.constant.checked_neg().ok_or(TermError::Overflow)?;
    let neg_w = || -> Result<Vec<i64>, TermError> {
        w.iter()
            .map(|a| a.checked_neg().ok_or(TermError::Overflow))
            .collect()
    };
    let neg_b = b.checked_neg().ok_or(TermError::Overflow)?;
    Ok(match op {
        CmpOp::Le => vec![LinearPredicate::new(w.clone(), b)],
        CmpOp::Lt => vec![LinearPredicate::new(
            w.clone(),
            b.checked_sub(1).ok_or(TermError::Overflow)?,
        )],
        CmpOp::Gt => vec![LinearPredicate::new(
            neg_w()?,
            neg_b.checked_sub(1).ok_or(TermError::Overflow)?,
        )],
        CmpOp::Ge => vec![LinearPredicate::new(neg_w()?, neg_b)],
        CmpOp::Eq => vec![
            LinearPredicate::new(w.clone(), b),
            LinearPredicate::new(neg_w()?, neg_b),
        ],
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DnfError {
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    Lia(#[from] LiaError),
}

/// Semantically equivalent DNF: negation pushed to atoms, then distribution.
/// The result is canonical (sorted, deduplicated).
pub fn to_dnf(f: &SurfaceFormula, vars: &[String], cap: usize) -> Result<DnfFormula, DnfError> {
    Ok(dnf_with_polarity(f, vars, true, cap)?.canonical())
}

fn dnf_with_polarity(
    f: &SurfaceFormula,
    vars: &[String],
    positive: bool,
    cap: usize,
) -> Result<DnfFormula, DnfError> {
    let n = vars.len();
    match (f, positive) {
        (SurfaceFormula::True, true) | (SurfaceFormula::False, false) => Ok(DnfFormula::truth(n)),
        (SurfaceFormula::True, false) | (SurfaceFormula::False, true) => Ok(DnfFormula::falsity(n)),
        (SurfaceFormula::Not(inner), _) => dnf_with_polarity(inner, vars, !positive, cap),
        (SurfaceFormula::Atom(op, lhs, rhs), _) => {
            let preds = desugar_atom(*op, lhs, rhs, vars)?;
            let cubes = if positive {
                vec![Cube::new(preds)]
            } else {
                preds.iter().map(|p| Cube::new(vec![p.negate()])).collect()
            };
            Ok(DnfFormula::new(n, cubes)?.canonical())
        }
        (SurfaceFormula::And(parts), true) | (SurfaceFormula::Or(parts), false) => {
            let mut acc = DnfFormula::truth(n);
            for part in parts {
                let d = dnf_with_polarity(part, vars, positive, cap)?;
                acc = acc.and(&d, cap)?;
            }
            Ok(acc)
        }
        (SurfaceFormula::Or(parts), true) | (SurfaceFormula::And(parts), false) => {
            let mut acc = DnfFormula::falsity(n);
            for part in parts {
                let d = dnf_with_polarity(part, vars, positive, cap)?;
                acc = acc.or(&d)?;
                if acc.cubes().len() > cap {
                    return Err(LiaError::DnfTooLarge {
                        size: acc.cubes().len(),
                        cap,
                    }
                    .into());
                }
            }
            Ok(acc)
        }
    }
}

/// Direct evaluation of a surface formula, independent of DNF conversion.
pub fn eval_surface(f: &SurfaceFormula, vars: &[String], x: &[i64]) -> Result<bool, TermError> {
    Ok(match f {
        SurfaceFormula::True => true,
        SurfaceFormula::False => false,
        SurfaceFormula::Not(g) => !eval_surface(g, vars, x)?,
        SurfaceFormula::And(gs) => {
            for g in gs {
                if !eval_surface(g, vars, x)? {
                    return Ok(false);
                }
            }
            true
        }
        SurfaceFormula::Or(gs) => {
            for g in gs {
                if eval_surface(g, vars, x)? {
                    return Ok(true);
                }
            }
            false
        }
        SurfaceFormula::Atom(op, lhs, rhs) => {
            let value = |t: &LinTerm| -> Result<i128, TermError> {
                let a = affine_form(t, vars)?;
                Ok(a.coeffs
                    .iter()
                    .zip(x)
                    .map(|(&w, &v)| w as i128 * v as i128)
                    .sum::<i128>()
                    + a.constant as i128)
            };
            let (l, r) = (value(lhs)?, value(rhs)?);
            match op {
                CmpOp::Le => l <= r,
                CmpOp::Lt => l < r,
                CmpOp::Gt => l > r,
                CmpOp::Ge => l >= r,
                CmpOp::Eq => l == r,
            }
        }
    })
}
