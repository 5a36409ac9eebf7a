//! Plain-text file formats.
//!
//! Density matrix:
//!
//! ```text
//! d 3
//! 0.111,0 0,0 ...      (d^2 rows of d^2 "re,im" pairs)
//! ```
//!
//! Probability table:
//!
//! ```text
//! # comment
//! m 2 d 3
//! 0 0 0 0 0.25          (i k a b p, one line per entry)
//! ```

use std::fmt::Write as _;

use num_complex::Complex64;

use super::{CMatrix, ProbabilityTable, QuditState};
use crate::{Error, Result};

/// Validation tolerance for matrices read from text.
pub const FILE_TOL: f64 = 1e-8;

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Non-empty, non-comment lines with 1-based line numbers; each token carries
/// its 1-based column.
fn lines(text: &str) -> impl Iterator<Item = (usize, Vec<(usize, &str)>)> {
    text.lines().enumerate().filter_map(|(n, raw)| {
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = Vec::new();
        let mut start = None;
        for (pos, ch) in content.char_indices() {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some(pos),
                (true, Some(s)) => {
                    tokens.push((s + 1, &content[s..pos]));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            tokens.push((s + 1, &content[s..]));
        }
        (!tokens.is_empty()).then_some((n + 1, tokens))
    })
}

fn parse_usize(line: usize, (col, tok): (usize, &str)) -> Result<usize> {
    tok.parse().map_err(|_| {
        parse_err(
            line,
            col,
            format!("expected a nonnegative integer, found '{tok}'"),
        )
    })
}

fn parse_f64(line: usize, col: usize, tok: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, col, format!("expected a number, found '{tok}'")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(parse_err(line, col, "non-finite number"))
    }
}

pub fn parse_density_matrix(text: &str) -> Result<QuditState> {
    let mut it = lines(text);
    let (hl, header) = it.next().ok_or_else(|| parse_err(1, 1, "empty file"))?;
    if header.len() != 2 || header[0].1 != "d" {
        return Err(parse_err(hl, 1, "expected header 'd <dim>'"));
    }
    let d = parse_usize(hl, header[1])?;
    if d < 2 {
        return Err(parse_err(hl, header[1].0, "dimension must be at least 2"));
    }
    let n = d * d;
    let mut rho = CMatrix::zeros(n, n);
    let mut last_line = hl;
    for r in 0..n {
        let (ln, toks) = it.next().ok_or_else(|| {
            parse_err(
                last_line + 1,
                1,
                format!("expected {n} matrix rows, found {r}"),
            )
        })?;
        last_line = ln;
        if toks.len() != n {
            return Err(parse_err(
                ln,
                1,
                format!("expected {n} entries, found {}", toks.len()),
            ));
        }
        for (c, (col, tok)) in toks.into_iter().enumerate() {
            let (re, im) = tok
                .split_once(',')
                .ok_or_else(|| parse_err(ln, col, format!("expected 're,im', found '{tok}'")))?;
            rho[(r, c)] = Complex64::new(
                parse_f64(ln, col, re)?,
                parse_f64(ln, col + re.len() + 1, im)?,
            );
        }
    }
    if let Some((ln, _)) = it.next() {
        return Err(parse_err(ln, 1, "unexpected trailing content"));
    }
    QuditState::mixed_with_tolerance(d, rho, FILE_TOL, FILE_TOL, -FILE_TOL)
}

pub fn format_density_matrix(state: &QuditState) -> String {
    let rho = state.density_matrix();
    let mut out = format!("d {}\n", state.dim());
    for r in 0..rho.nrows() {
        let row: Vec<String> = (0..rho.ncols())
            .map(|c| format!("{:e},{:e}", rho[(r, c)].re, rho[(r, c)].im))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_probability_table(text: &str) -> Result<ProbabilityTable> {
    let mut it = lines(text);
    let (hl, header) = it.next().ok_or_else(|| parse_err(1, 1, "empty file"))?;
    if header.len() != 4 || header[0].1 != "m" || header[2].1 != "d" {
        return Err(parse_err(hl, 1, "expected header 'm <m> d <d>'"));
    }
    let m = parse_usize(hl, header[1])?;
    let d = parse_usize(hl, header[3])?;
    if m == 0 {
        return Err(parse_err(hl, header[1].0, "m must be positive"));
    }
    if d < 2 {
        return Err(parse_err(hl, header[3].0, "d must be at least 2"));
    }
    let total = m * m * d * d;
    let mut data = vec![0.0; total];
    let mut seen = vec![false; total];
    for (ln, toks) in it {
        if toks.len() != 5 {
            return Err(parse_err(
                ln,
                1,
                format!("expected 'i k a b p', found {} fields", toks.len()),
            ));
        }
        let mut idx = [0usize; 4];
        for (slot, &tok) in idx.iter_mut().zip(&toks[..4]) {
            *slot = parse_usize(ln, tok)?;
        }
        let [i, k, a, b] = idx;
        if i >= m || k >= m {
            return Err(parse_err(
                ln,
                toks[if i >= m { 0 } else { 1 }].0,
                "setting index out of range",
            ));
        }
        if a >= d || b >= d {
            return Err(parse_err(
                ln,
                toks[if a >= d { 2 } else { 3 }].0,
                "outcome out of range",
            ));
        }
        let flat = ((i * m + k) * d + a) * d + b;
        if seen[flat] {
            return Err(parse_err(ln, 1, "duplicate entry"));
        }
        seen[flat] = true;
        data[flat] = parse_f64(ln, toks[4].0, toks[4].1)?;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        let (ik, ab) = (missing / (d * d), missing % (d * d));
        return Err(parse_err(
            0,
            0,
            format!(
                "missing entry i={} k={} a={} b={}",
                ik / m,
                ik % m,
                ab / d,
                ab % d
            ),
        ));
    }
    ProbabilityTable::new(m, d, data)
}

pub fn format_probability_table(table: &ProbabilityTable) -> String {
    let (m, d) = (table.settings(), table.outcomes());
    let mut out = format!("m {m} d {d}\n");
    for i in 0..m {
        for k in 0..m {
            for a in 0..d {
                for b in 0..d {
                    let _ = writeln!(out, "{i} {k} {a} {b} {:e}", table.get(i, k, a, b));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_round_trip() {
        let s = QuditState::schmidt(2, &[0.6, 0.8]).unwrap();
        let back = parse_density_matrix(&format_density_matrix(&s)).unwrap();
        assert!((back.density_matrix() - s.density_matrix()).norm() < 1e-15);
    }

    #[test]
    fn density_errors_point_at_the_token() {
        let text = "d 2\n0.5,0 0,0 0,0 0,0\n0,0 0,0 0,0 0,0\n0,0 0,0 x,0 0,0\n0,0 0,0 0,0 0.5,0\n";
        match parse_density_matrix(text) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (4, 9)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_density_matrix("d 2\n1,0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        // Trace 1.1 fails the invariant check.
        let bad = "d 2\n0.6,0 0,0 0,0 0,0\n0,0 0.5,0 0,0 0,0\n0,0 0,0 0,0 0,0\n0,0 0,0 0,0 0,0\n";
        assert!(matches!(
            parse_density_matrix(bad),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn table_round_trip_and_comments() {
        let t = ProbabilityTable::uniform(2, 2).unwrap();
        let text = format!("# uniform\n{}", format_probability_table(&t));
        assert_eq!(parse_probability_table(&text).unwrap(), t);
    }

    #[test]
    fn table_errors() {
        assert!(matches!(
            parse_probability_table("m 1 d 2\n0 0 0 0 0.5\n0 0 0 1 0.5\n0 0 1 0 0\n0 0 1 2 0\n"),
            Err(Error::Parse {
                line: 5,
                column: 7,
                ..
            })
        ));
        assert!(matches!(
            parse_probability_table("m 1 d 2\n0 0 0 0 0.5\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_probability_table("x 1 d 2\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
