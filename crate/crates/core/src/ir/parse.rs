use std::fmt;

use super::{
    Assignment, ChcDocument, CmpOp, LinTerm, SurfaceFormula, TransBlock, DEFAULT_INT_BOUND,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone)]
enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }

    fn describe(&self) -> String {
        match self {
            Sexp::Atom(s, _) => format!("`{s}`"),
            Sexp::List(items, _) => match items.first() {
                Some(Sexp::Atom(head, _)) => format!("list `({head} ...)`"),
                _ => "list".to_string(),
            },
        }
    }
}

fn err<T>(pos: Pos, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line: pos.line,
        col: pos.col,
        message: message.into(),
    })
}

fn read_all(text: &str) -> Result<Vec<Sexp>, ParseError> {
    let mut stack: Vec<(Vec<Sexp>, Pos)> = Vec::new();
    let mut top = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    let mut atom = String::new();
    let mut atom_pos = Pos { line, col };

    fn flush(atom: &mut String, pos: Pos, stack: &mut [(Vec<Sexp>, Pos)], top: &mut Vec<Sexp>) {
        if atom.is_empty() {
            return;
        }
        let s = Sexp::Atom(std::mem::take(atom), pos);
        match stack.last_mut() {
            Some((items, _)) => items.push(s),
            None => top.push(s),
        }
    }

    while let Some(ch) = chars.next() {
        let here = Pos { line, col };
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
        match ch {
            ';' => {
                flush(&mut atom, atom_pos, &mut stack, &mut top);
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '(' => {
                flush(&mut atom, atom_pos, &mut stack, &mut top);
                stack.push((Vec::new(), here));
            }
            ')' => {
                flush(&mut atom, atom_pos, &mut stack, &mut top);
                let Some((items, open)) = stack.pop() else {
                    return err(here, "unbalanced `)`");
                };
                let list = Sexp::List(items, open);
                match stack.last_mut() {
                    Some((items, _)) => items.push(list),
                    None => top.push(list),
                }
            }
            c if c.is_whitespace() => flush(&mut atom, atom_pos, &mut stack, &mut top),
            c => {
                if atom.is_empty() {
                    atom_pos = here;
                }
                atom.push(c);
            }
        }
    }
    flush(&mut atom, atom_pos, &mut stack, &mut top);
    if let Some((_, open)) = stack.last() {
        return err(*open, "unclosed `(`");
    }
    Ok(top)
}

const KEYWORDS: &[&str] = &[
    "chc", "vars", "bound", "pre", "guard", "trans", "post", "block", "true", "false", "and", "or",
    "not", "<=", "<", ">", ">=", "=", "+", "-", "*",
];

fn parse_int(s: &str) -> Option<i64> {
    let digits = s.strip_prefix('-').unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

fn looks_numeric(s: &str) -> bool {
    let digits = s.strip_prefix('-').unwrap_or(s);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

struct Ctx<'a> {
    vars: &'a [String],
}

impl Ctx<'_> {
    fn var(&self, s: &str, pos: Pos) -> Result<String, ParseError> {
        if self.vars.iter().any(|v| v == s) {
            Ok(s.to_string())
        } else {
            err(pos, format!("unknown variable `{s}`"))
        }
    }

    fn term(&self, e: &Sexp) -> Result<LinTerm, ParseError> {
        match e {
            Sexp::Atom(s, pos) => {
                if looks_numeric(s) {
                    return match parse_int(s) {
                        Some(v) => Ok(LinTerm::Int(v)),
                        None => err(*pos, format!("integer literal `{s}` out of range")),
                    };
                }
                self.var(s, *pos).map(LinTerm::Var)
            }
            Sexp::List(items, pos) => {
                let Some(Sexp::Atom(head, _)) = items.first() else {
                    return err(*pos, "expected a linear term");
                };
                let args = &items[1..];
                match head.as_str() {
                    "+" => {
                        if args.is_empty() {
                            return err(*pos, "`+` needs at least one argument");
                        }
                        Ok(LinTerm::Add(
                            args.iter()
                                .map(|a| self.term(a))
                                .collect::<Result<_, _>>()?,
                        ))
                    }
                    "-" => match args {
                        [a] => Ok(LinTerm::Sub(Box::new(self.term(a)?), None)),
                        [a, b] => Ok(LinTerm::Sub(
                            Box::new(self.term(a)?),
                            Some(Box::new(self.term(b)?)),
                        )),
                        _ => err(*pos, "`-` takes one or two arguments"),
                    },
                    "*" => {
                        if args.len() != 2 {
                            return err(*pos, "`*` takes exactly two arguments");
                        }
                        let lhs = self.term(&args[0])?;
                        let rhs = self.term(&args[1])?;
                        match (lhs, rhs) {
                            (LinTerm::Int(k), LinTerm::Var(v)) => Ok(LinTerm::Mul(k, v)),
                            (LinTerm::Int(_), LinTerm::Int(_)) => {
                                err(*pos, "`*` expects an integer and a variable")
                            }
                            (LinTerm::Int(_), _) => err(
                                args[1].pos(),
                                "`*` expects a variable as its second argument",
                            ),
                            _ => err(
                                *pos,
                                "non-linear term: multiplication is only allowed by an integer literal",
                            ),
                        }
                    }
                    other => err(*pos, format!("unexpected `{other}` in linear term")),
                }
            }
        }
    }

    fn formula(&self, e: &Sexp) -> Result<SurfaceFormula, ParseError> {
        match e {
            Sexp::Atom(s, pos) => match s.as_str() {
                "true" => Ok(SurfaceFormula::True),
                "false" => Ok(SurfaceFormula::False),
                _ => err(*pos, format!("expected a formula, found `{s}`")),
            },
            Sexp::List(items, pos) => {
                let Some(Sexp::Atom(head, _)) = items.first() else {
                    return err(*pos, "expected a formula");
                };
                let args = &items[1..];
                match head.as_str() {
                    "and" | "or" => {
                        if args.is_empty() {
                            return err(*pos, format!("`{head}` needs at least one argument"));
                        }
                        let parts = args
                            .iter()
                            .map(|a| self.formula(a))
                            .collect::<Result<Vec<_>, _>>()?;
                        Ok(if head == "and" {
                            SurfaceFormula::And(parts)
                        } else {
                            SurfaceFormula::Or(parts)
                        })
                    }
                    "not" => {
                        if args.len() != 1 {
                            return err(*pos, "`not` takes exactly one argument");
                        }
                        Ok(SurfaceFormula::Not(Box::new(self.formula(&args[0])?)))
                    }
                    cmp => match CmpOp::from_symbol(cmp) {
                        Some(op) => {
                            if args.len() != 2 {
                                return err(*pos, format!("`{cmp}` takes exactly two arguments"));
                            }
                            Ok(SurfaceFormula::Atom(
                                op,
                                self.term(&args[0])?,
                                self.term(&args[1])?,
                            ))
                        }
                        None => err(*pos, format!("unknown formula head `{cmp}`")),
                    },
                }
            }
        }
    }

    fn assignments(&self, e: &Sexp) -> Result<Vec<Assignment>, ParseError> {
        let Sexp::List(items, pos) = e else {
            return err(e.pos(), "expected a parenthesized list of assignments");
        };
        if items.is_empty() {
            return err(*pos, "assignment list must not be empty");
        }
        let mut out: Vec<Assignment> = Vec::new();
        for item in items {
            let Sexp::List(pair, ppos) = item else {
                return err(item.pos(), "expected an assignment `(var term)`");
            };
            let [Sexp::Atom(name, npos), rhs] = pair.as_slice() else {
                return err(*ppos, "expected an assignment `(var term)`");
            };
            let var = self.var(name, *npos)?;
            if out.iter().any(|a| a.var == var) {
                return err(*npos, format!("variable `{var}` assigned twice in one map"));
            }
            out.push(Assignment {
                var,
                term: self.term(rhs)?,
            });
        }
        Ok(out)
    }

    fn block(&self, e: &Sexp) -> Result<TransBlock, ParseError> {
        let items = expect_section(e, "block")?;
        if items.len() < 2 {
            return err(
                e.pos(),
                "`block` needs a guard and at least one assignment list",
            );
        }
        let guard = self.formula(&items[0])?;
        let maps = items[1..]
            .iter()
            .map(|m| self.assignments(m))
            .collect::<Result<_, _>>()?;
        Ok(TransBlock { guard, maps })
    }
}

fn expect_section<'a>(e: &'a Sexp, name: &str) -> Result<&'a [Sexp], ParseError> {
    match e {
        Sexp::List(items, _) if matches!(items.first(), Some(Sexp::Atom(h, _)) if h == name) => {
            Ok(&items[1..])
        }
        other => err(
            other.pos(),
            format!("expected `({name} ...)`, found {}", other.describe()),
        ),
    }
}

fn single<'a>(e: &'a Sexp, name: &str) -> Result<&'a Sexp, ParseError> {
    match expect_section(e, name)? {
        [one] => Ok(one),
        _ => err(e.pos(), format!("`{name}` takes exactly one argument")),
    }
}

/// Parses a complete `(chc ...)` document. Warnings are logged.
pub fn parse_chc(text: &str) -> Result<ChcDocument, ParseError> {
    let (doc, warnings) = parse_chc_with_warnings(text)?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(doc)
}

/// Parses a document and returns its non-fatal warnings.
pub fn parse_chc_with_warnings(text: &str) -> Result<(ChcDocument, Vec<String>), ParseError> {
    let mut warnings = Vec::new();
    let top = read_all(text)?;
    let doc = match top.as_slice() {
        [one] => one,
        [] => return err(Pos { line: 1, col: 1 }, "empty input"),
        [_, second, ..] => return err(second.pos(), "trailing input after `(chc ...)`"),
    };
    let sections = expect_section(doc, "chc")?;
    let mut it = sections.iter().peekable();
    let end = doc.pos();

    let vars_sexp = it
        .next()
        .map_or_else(|| err(end, "expected `(vars ...)`"), Ok)?;
    let mut variables: Vec<String> = Vec::new();
    for v in expect_section(vars_sexp, "vars")? {
        let Sexp::Atom(name, pos) = v else {
            return err(v.pos(), "variable names must be identifiers");
        };
        if looks_numeric(name) || KEYWORDS.contains(&name.as_str()) {
            return err(*pos, format!("`{name}` is not a valid variable name"));
        }
        if variables.contains(name) {
            return err(*pos, format!("variable `{name}` declared twice"));
        }
        variables.push(name.clone());
    }
    if variables.is_empty() {
        return err(vars_sexp.pos(), "at least one variable must be declared");
    }

    let mut int_bound = DEFAULT_INT_BOUND;
    let is_bound = |e: &Sexp| matches!(e, Sexp::List(items, _) if matches!(items.first(), Some(Sexp::Atom(h, _)) if h == "bound"));
    if it.peek().is_some_and(|e| is_bound(e)) {
        let b = it.next().expect("peeked");
        match single(b, "bound")? {
            Sexp::Atom(s, pos) => match parse_int(s) {
                Some(v) if (1..=(1i64 << 62)).contains(&v) => int_bound = v,
                _ => {
                    return err(
                        *pos,
                        format!("bound must be a positive integer, found `{s}`"),
                    )
                }
            },
            other => return err(other.pos(), "bound must be a positive integer"),
        }
    } else {
        warnings.push(format!(
            "no (bound N) section; using int_bound = {DEFAULT_INT_BOUND}"
        ));
    }

    let ctx = Ctx { vars: &variables };
    let mut next_section = |name: &str| -> Result<&Sexp, ParseError> {
        it.next()
            .map_or_else(|| err(end, format!("missing `({name} ...)` section")), Ok)
    };
    let pre = ctx.formula(single(next_section("pre")?, "pre")?)?;
    let guard = ctx.formula(single(next_section("guard")?, "guard")?)?;
    let trans_sexp = next_section("trans")?;
    let blocks = expect_section(trans_sexp, "trans")?;
    if blocks.is_empty() {
        return err(trans_sexp.pos(), "`trans` needs at least one block");
    }
    let trans = blocks
        .iter()
        .map(|b| ctx.block(b))
        .collect::<Result<_, _>>()?;
    let post = ctx.formula(single(next_section("post")?, "post")?)?;
    if let Some(extra) = it.next() {
        return err(
            extra.pos(),
            format!("unexpected section {}", extra.describe()),
        );
    }
    let doc = ChcDocument {
        variables,
        int_bound,
        pre,
        guard,
        trans,
        post,
    };
    Ok((doc, warnings))
}

/// Parses a standalone formula over `vars`, e.g. an invariant file.
pub fn parse_formula(text: &str, vars: &[String]) -> Result<SurfaceFormula, ParseError> {
    let top = read_all(text)?;
    match top.as_slice() {
        [one] => Ctx { vars }.formula(one),
        [] => err(Pos { line: 1, col: 1 }, "empty input"),
        [_, second, ..] => err(second.pos(), "trailing input after formula"),
    }
}
