//! Point-set text format.
//!
//! ```text
//! n d              n d weighted
//! x11 ... x1d      w1 x11 ... x1d
//! ...              ...
//! ```
//!
//! Values are written with 17 significant digits, so a write/parse cycle is
//! bit-exact. Blank lines and lines starting with `#` are skipped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{ParseError, Result};
use crate::geometry::{Point, WeightedPointSet};

fn parse_value(tok: &str, line: usize) -> Result<f64, ParseError> {
    let v: f64 = tok.parse().map_err(|_| ParseError::BadNumber {
        line,
        token: tok.to_string(),
    })?;
    if !v.is_finite() {
        return Err(ParseError::NonFinite {
            line,
            token: tok.to_string(),
        });
    }
    Ok(v)
}

/// Parse a point set from text. Unweighted files get unit weights.
pub fn parse_pointset_str(text: &str) -> Result<WeightedPointSet, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or(ParseError::MalformedHeader {
        line: 1,
        text: String::new(),
    })?;
    let bad_header = || ParseError::MalformedHeader {
        line: hline,
        text: header.to_string(),
    };
    let toks: Vec<&str> = header.split_whitespace().collect();
    let weighted = match toks.as_slice() {
        [_, _] => false,
        [_, _, "weighted"] => true,
        _ => return Err(bad_header()),
    };
    let n: usize = toks[0].parse().map_err(|_| bad_header())?;
    let d: usize = toks[1].parse().map_err(|_| bad_header())?;

    let width = d + usize::from(weighted);
    let mut points = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (line, row) in lines {
        let vals: Vec<&str> = row.split_whitespace().collect();
        if vals.len() != width {
            return Err(ParseError::RowLength {
                line,
                expected: width,
                got: vals.len(),
            });
        }
        let mut nums = vals
            .iter()
            .map(|t| parse_value(t, line))
            .collect::<Result<Vec<f64>, _>>()?;
        let w = if weighted { nums.remove(0) } else { 1.0 };
        if w < 0.0 {
            return Err(ParseError::NegativeWeight { line, weight: w });
        }
        points.push(Point::new(nums).expect("finite values checked"));
        weights.push(w);
    }
    if points.len() != n {
        return Err(ParseError::RowCount {
            expected: n,
            got: points.len(),
        });
    }
    Ok(WeightedPointSet::new(d, points, weights).expect("validated rows"))
}

pub fn parse_pointset(path: impl AsRef<Path>) -> Result<WeightedPointSet> {
    let text = fs::read_to_string(path)?;
    Ok(parse_pointset_str(&text)?)
}

#[inline]
fn fmt_f64(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("write to string");
}

/// Serialize; `weighted = false` drops the weight column.
pub fn format_pointset(p: &WeightedPointSet, weighted: bool) -> String {
    let mut out = String::with_capacity(p.len() * (p.dim() + 1) * 24 + 32);
    if weighted {
        writeln!(out, "{} {} weighted", p.len(), p.dim()).unwrap();
    } else {
        writeln!(out, "{} {}", p.len(), p.dim()).unwrap();
    }
    for (x, w) in p.iter() {
        let mut first = true;
        if weighted {
            fmt_f64(&mut out, w);
            first = false;
        }
        for &c in x.coords() {
            if !first {
                out.push(' ');
            }
            fmt_f64(&mut out, c);
            first = false;
        }
        out.push('\n');
    }
    out
}

pub fn write_pointset(path: impl AsRef<Path>, p: &WeightedPointSet, weighted: bool) -> Result<()> {
    fs::write(path, format_pointset(p, weighted))?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// One nonnegative integer per line (blank lines and `#` comments skipped).
pub fn parse_index_list(text: &str) -> Result<Vec<usize>, ParseError> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(line, l)| {
            l.parse().map_err(|_| ParseError::BadNumber {
                line,
                token: l.to_string(),
            })
        })
        .collect()
}
