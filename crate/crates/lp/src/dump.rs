//! Human-readable LP dump format, for debugging.
//!
//! ```text
//! file     := header vars obj bound* row* "end"
//! header   := "lp" ("maximize" | "minimize")
//! vars     := "vars" <count>
//! obj      := "obj" <real>{count}
//! bound    := "bound" <index> <real> <real>      # default bounds are [0, inf)
//! row      := "row" ("le" | "eq" | "ge") <rhs> (<index> ":" <real>)*
//! ```
//!
//! One statement per line; blank lines and lines starting with `#` are
//! ignored. Reals accept `inf` and `-inf`. Rows list only nonzero
//! coefficients. Values are written with 17 significant digits so a dump
//! parses back to the identical program.

use std::fmt::Write as _;

use thiserror::Error;

use crate::{LinearProgram, Relation, Sense};

#[derive(Debug, Error)]
#[error("line {line}: {message}")]
pub struct ParseLpError {
    pub line: usize,
    pub message: String,
}

fn real(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_lp(lp: &LinearProgram) -> String {
    let mut out = String::new();
    let sense = match lp.sense {
        Sense::Maximize => "maximize",
        Sense::Minimize => "minimize",
    };
    let _ = writeln!(out, "lp {sense}");
    let _ = writeln!(out, "vars {}", lp.num_vars());
    let obj: Vec<String> = lp.objective.iter().map(|&c| real(c)).collect();
    let _ = writeln!(out, "obj {}", obj.join(" "));
    for j in 0..lp.num_vars() {
        if lp.lower[j] != 0.0 || lp.upper[j] != f64::INFINITY {
            let _ = writeln!(out, "bound {j} {} {}", real(lp.lower[j]), real(lp.upper[j]));
        }
    }
    for row in &lp.constraints {
        let rel = match row.relation {
            Relation::LessEq => "le",
            Relation::Equal => "eq",
            Relation::GreaterEq => "ge",
        };
        let _ = write!(out, "row {rel} {}", real(row.rhs));
        for (j, &a) in row.coeffs.iter().enumerate() {
            if a != 0.0 {
                let _ = write!(out, " {j}:{}", real(a));
            }
        }
        out.push('\n');
    }
    out.push_str("end\n");
    out
}

pub fn parse_lp(text: &str) -> Result<LinearProgram, ParseLpError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let err = |line: usize, message: String| ParseLpError { line, message };
    let num = |line: usize, tok: &str| -> Result<f64, ParseLpError> {
        match tok {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            _ => tok
                .parse::<f64>()
                .map_err(|_| err(line, format!("invalid number `{tok}`"))),
        }
    };

    let (ln, header) = lines.next().ok_or_else(|| err(0, "empty input".into()))?;
    let sense = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["lp", "maximize"] => Sense::Maximize,
        ["lp", "minimize"] => Sense::Minimize,
        _ => return Err(err(ln, format!("bad header `{header}`"))),
    };
    let (ln, vars) = lines.next().ok_or_else(|| err(ln, "missing vars".into()))?;
    let n: usize = match vars.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["vars", count] => count
            .parse()
            .map_err(|_| err(ln, format!("bad variable count `{count}`")))?,
        _ => return Err(err(ln, format!("expected `vars <count>`, got `{vars}`"))),
    };
    let (ln, obj) = lines.next().ok_or_else(|| err(ln, "missing obj".into()))?;
    let mut toks = obj.split_whitespace();
    if toks.next() != Some("obj") {
        return Err(err(ln, "expected `obj`".into()));
    }
    let objective = toks.map(|t| num(ln, t)).collect::<Result<Vec<_>, _>>()?;
    if objective.len() != n {
        return Err(err(ln, format!("expected {n} objective coefficients")));
    }
    let mut lp = LinearProgram::new(sense, objective);

    for (ln, line) in lines {
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("end") => return Ok(lp),
            Some("bound") => {
                let parts: Vec<&str> = toks.collect();
                let [j, lo, hi] = parts.as_slice() else {
                    return Err(err(ln, "expected `bound <index> <lo> <hi>`".into()));
                };
                let j: usize = j.parse().map_err(|_| err(ln, format!("bad index `{j}`")))?;
                if j >= n {
                    return Err(err(ln, format!("index {j} out of range")));
                }
                lp.set_bounds(j, num(ln, lo)?, num(ln, hi)?);
            }
            Some("row") => {
                let relation = match toks.next() {
                    Some("le") => Relation::LessEq,
                    Some("eq") => Relation::Equal,
                    Some("ge") => Relation::GreaterEq,
                    other => return Err(err(ln, format!("bad relation {other:?}"))),
                };
                let rhs = num(ln, toks.next().ok_or_else(|| err(ln, "missing rhs".into()))?)?;
                let mut coeffs = vec![0.0; n];
                for t in toks {
                    let (j, a) = t
                        .split_once(':')
                        .ok_or_else(|| err(ln, format!("bad term `{t}`")))?;
                    let j: usize = j.parse().map_err(|_| err(ln, format!("bad index `{j}`")))?;
                    if j >= n {
                        return Err(err(ln, format!("index {j} out of range")));
                    }
                    coeffs[j] = num(ln, a)?;
                }
                lp.add_constraint(coeffs, relation, rhs);
            }
            Some(other) => return Err(err(ln, format!("unknown statement `{other}`"))),
            None => {}
        }
    }
    Err(err(0, "missing `end`".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_roundtrip() {
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0 / 3.0, -2.5]);
        lp.set_bounds(1, f64::NEG_INFINITY, 7.0);
        lp.add_constraint(vec![0.1, 0.0], Relation::GreaterEq, -1e-300);
        lp.add_constraint(vec![1.0, 1.0], Relation::Equal, 2.0);
        let text = write_lp(&lp);
        assert_eq!(parse_lp(&text).unwrap(), lp);
    }

    #[test]
    fn reports_line_of_error() {
        let e = parse_lp("lp maximize\nvars 1\nobj 1\nrow lt 3 0:1\nend\n").unwrap_err();
        assert_eq!(e.line, 4);
        assert!(parse_lp("lp maximize\nvars 1\nobj 1\n").is_err());
    }
}
