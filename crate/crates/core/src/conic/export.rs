//! Plain-text sparse export of a [`ConicProgram`] for cross-checking with
//! external solvers.
//!
//! ```text
//! CONIC 1
//! BLOCKS <count>
//! <PSD|NONNEG|FREE> <size> <name>          one line per block
//! OBJECTIVE <constant> <nterms>
//! <block> <row> <col> <coeff>              one line per term
//! CONSTRAINTS <count>
//! EQ <constant> <nterms>                   expr = 0, followed by its terms
//! GE <constant> <nterms>                   expr ≥ 0, followed by its terms
//! SOC <len>                                ‖(e_2..e_len)‖ ≤ e_1, followed by
//! EXPR <constant> <nterms>                 `len` expressions with their terms
//! END
//! ```
//!
//! PSD terms address the symmetric entry `(row, col)` with `row ≤ col`; a
//! coefficient `c` there contributes `c · Y_row,col` once. Vector blocks use `col = 0`.
//! Numbers are written in shortest round-trip form.

use std::fmt::Write as _;

use super::{BlockId, BlockKind, ConicError, ConicProgram, Constraint, Coord, LinearExpr};

fn write_terms(out: &mut String, e: &LinearExpr) {
    for (c, v) in &e.terms {
        let _ = writeln!(out, "{} {} {} {:?}", c.block.0, c.row, c.col, v);
    }
}

pub fn write_program(p: &ConicProgram) -> String {
    let mut out = String::new();
    out.push_str("CONIC 1\n");
    let _ = writeln!(out, "BLOCKS {}", p.blocks().len());
    for b in p.blocks() {
        let (tag, n) = match b.kind {
            BlockKind::Psd(n) => ("PSD", n),
            BlockKind::Nonneg(n) => ("NONNEG", n),
            BlockKind::Free(n) => ("FREE", n),
        };
        let name: String = b.name.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect();
        let _ = writeln!(out, "{tag} {n} {name}");
    }
    let _ = writeln!(out, "OBJECTIVE {:?} {}", p.objective().constant, p.objective().terms.len());
    write_terms(&mut out, p.objective());
    let _ = writeln!(out, "CONSTRAINTS {}", p.constraints().len());
    for c in p.constraints() {
        match c {
            Constraint::Equal(e) | Constraint::NonNegative(e) => {
                let tag = if matches!(c, Constraint::Equal(_)) { "EQ" } else { "GE" };
                let _ = writeln!(out, "{tag} {:?} {}", e.constant, e.terms.len());
                write_terms(&mut out, e);
            }
            Constraint::SecondOrder { bound, vector } => {
                let _ = writeln!(out, "SOC {}", vector.len() + 1);
                for e in std::iter::once(bound).chain(vector) {
                    let _ = writeln!(out, "EXPR {:?} {}", e.constant, e.terms.len());
                    write_terms(&mut out, e);
                }
            }
        }
    }
    out.push_str("END\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_fields(&mut self) -> Result<Vec<&'a str>, ConicError> {
        loop {
            let (i, l) = self.inner.next().ok_or(ConicError::Parse {
                line: self.line + 1,
                message: "unexpected end of input".into(),
            })?;
            self.line = i + 1;
            let l = l.trim();
            if !l.is_empty() && !l.starts_with('#') {
                return Ok(l.split_whitespace().collect());
            }
        }
    }

    fn err(&self, message: impl Into<String>) -> ConicError {
        ConicError::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T, ConicError> {
        s.parse().map_err(|_| self.err(format!("cannot parse '{s}'")))
    }

    fn expect(&mut self, tag: &str, arity: usize) -> Result<Vec<&'a str>, ConicError> {
        let f = self.next_fields()?;
        if f.first() != Some(&tag) || f.len() != arity + 1 {
            return Err(self.err(format!("expected '{tag}' with {arity} fields")));
        }
        Ok(f[1..].to_vec())
    }

    fn expr(&mut self, constant: f64, nterms: usize) -> Result<LinearExpr, ConicError> {
        let mut e = LinearExpr::constant(constant);
        for _ in 0..nterms {
            let f = self.next_fields()?;
            if f.len() != 4 {
                return Err(self.err("term lines need 4 fields"));
            }
            let coord = Coord {
                block: BlockId(self.parse(f[0])?),
                row: self.parse(f[1])?,
                col: self.parse(f[2])?,
            };
            e.terms.push((coord, self.parse(f[3])?));
        }
        Ok(e)
    }
}

/// Parses the format produced by [`write_program`] and validates the result.
pub fn read_program(text: &str) -> Result<ConicProgram, ConicError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let v = lines.expect("CONIC", 1)?;
    if v[0] != "1" {
        return Err(lines.err("unsupported version"));
    }
    let nblocks: usize = {
        let f = lines.expect("BLOCKS", 1)?;
        lines.parse(f[0])?
    };
    let mut p = ConicProgram::new();
    for _ in 0..nblocks {
        let f = lines.next_fields()?;
        if f.len() != 3 {
            return Err(lines.err("block lines need 3 fields"));
        }
        let n: usize = lines.parse(f[1])?;
        let kind = match f[0] {
            "PSD" => BlockKind::Psd(n),
            "NONNEG" => BlockKind::Nonneg(n),
            "FREE" => BlockKind::Free(n),
            other => return Err(lines.err(format!("unknown block kind '{other}'"))),
        };
        p.add_block(kind, f[2]);
    }
    let f = lines.expect("OBJECTIVE", 2)?;
    let (c, n) = (lines.parse(f[0])?, lines.parse(f[1])?);
    let obj = lines.expr(c, n)?;
    p.set_objective(obj);
    let f = lines.expect("CONSTRAINTS", 1)?;
    let count: usize = lines.parse(f[0])?;
    for _ in 0..count {
        let f = lines.next_fields()?;
        match (f.first().copied(), f.len()) {
            (Some(tag @ ("EQ" | "GE")), 3) => {
                let (c, n) = (lines.parse(f[1])?, lines.parse(f[2])?);
                let e = lines.expr(c, n)?;
                p.add_constraint(if tag == "EQ" {
                    Constraint::Equal(e)
                } else {
                    Constraint::NonNegative(e)
                });
            }
            (Some("SOC"), 2) => {
                let len: usize = lines.parse(f[1])?;
                if len < 2 {
                    return Err(lines.err("SOC needs at least 2 entries"));
                }
                let mut exprs = Vec::with_capacity(len);
                for _ in 0..len {
                    let f = lines.expect("EXPR", 2)?;
                    let (c, n) = (lines.parse(f[0])?, lines.parse(f[1])?);
                    exprs.push(lines.expr(c, n)?);
                }
                let bound = exprs.remove(0);
                p.add_constraint(Constraint::SecondOrder { bound, vector: exprs });
            }
            _ => return Err(lines.err("expected EQ, GE or SOC")),
        }
    }
    lines.expect("END", 0)?;
    p.validate()?;
    Ok(p)
}
