//! Text formats for datasets and single matrices.
//!
//! Dataset:
//! ```text
//! SPDDS 1
//! n=<count> d=<dim>
//! <label> <d*d entries, row-major>     (one line per sample, label +1 or -1)
//! ```
//! Matrix:
//! ```text
//! SPDM 1
//! d=<dim>
//! <d entries>                          (d lines)
//! ```
//! Entries use the shortest decimal string that round-trips.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::alignment::{Label, LabeledSpdDataset};
use crate::error::{Error, Result};
use crate::symmat::{assert_spd, sym, SpdMatrix, DEFAULT_SPD_TOL};

const DATASET_MAGIC: &str = "SPDDS 1";
const MATRIX_MAGIC: &str = "SPDM 1";

fn push_entries(out: &mut String, entries: impl Iterator<Item = f64>) {
    for (k, v) in entries.enumerate() {
        if k > 0 {
            out.push(' ');
        }
        // Debug formatting is the shortest round-trip representation.
        write!(out, "{v:?}").unwrap();
    }
}

pub fn format_dataset(ds: &LabeledSpdDataset) -> String {
    let d = ds.dim();
    let mut out = format!("{DATASET_MAGIC}\nn={} d={d}\n", ds.len());
    for (x, y) in ds.samples().iter().zip(ds.labels()) {
        write!(out, "{y} ").unwrap();
        push_entries(&mut out, x.as_sym().to_row_major().into_iter());
        out.push('\n');
    }
    out
}

pub fn format_matrix(m: &SpdMatrix) -> String {
    let d = m.dim();
    let mut out = format!("{MATRIX_MAGIC}\nd={d}\n");
    let rows = m.as_sym().to_row_major();
    for row in rows.chunks(d) {
        push_entries(&mut out, row.iter().copied());
        out.push('\n');
    }
    out
}

struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        Lines {
            path,
            inner: text.lines().enumerate().peekable(),
        }
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    /// Next non-blank line and its 1-based number.
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            if !l.trim().is_empty() {
                return Ok((i + 1, l.trim()));
            }
        }
        Err(self.err(0, format!("unexpected end of file, expected {what}")))
    }

    fn expect_end(&mut self) -> Result<()> {
        for (i, l) in self.inner.by_ref() {
            if !l.trim().is_empty() {
                return Err(Error::Parse {
                    path: self.path.to_path_buf(),
                    line: i + 1,
                    msg: "trailing content after the declared number of rows".into(),
                });
            }
        }
        Ok(())
    }
}

fn parse_kv(lines: &Lines<'_>, line: usize, token: &str, key: &str) -> Result<usize> {
    token
        .strip_prefix(key)
        .and_then(|s| s.strip_prefix('='))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| lines.err(line, format!("expected `{key}=<integer>`, found `{token}`")))
}

fn parse_entries(lines: &Lines<'_>, line: usize, tokens: &[&str], expected: usize) -> Result<Vec<f64>> {
    if tokens.len() != expected {
        return Err(lines.err(line, format!("expected {expected} entries, found {}", tokens.len())));
    }
    tokens
        .iter()
        .map(|t| match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(lines.err(line, format!("invalid number `{t}`"))),
        })
        .collect()
}

fn to_spd(d: usize, entries: &[f64], index: Option<usize>) -> Result<SpdMatrix> {
    let m = nalgebra::DMatrix::from_row_slice(d, d, entries);
    assert_spd(sym(&m), DEFAULT_SPD_TOL).map_err(|e| match e {
        Error::NotPositiveDefinite { min_eigenvalue, .. } => Error::NotPositiveDefinite { min_eigenvalue, index },
        other => other,
    })
}

/// Parses dataset text; `path` is only used in diagnostics.
pub fn parse_dataset(text: &str, path: &Path) -> Result<LabeledSpdDataset> {
    let mut lines = Lines::new(path, text);
    let (ln, magic) = lines.next("header")?;
    if magic != DATASET_MAGIC {
        return Err(lines.err(ln, format!("expected `{DATASET_MAGIC}` header")));
    }
    let (ln, dims) = lines.next("`n=<count> d=<dim>`")?;
    let tokens: Vec<&str> = dims.split_whitespace().collect();
    if tokens.len() != 2 {
        return Err(lines.err(ln, "expected `n=<count> d=<dim>`"));
    }
    let n = parse_kv(&lines, ln, tokens[0], "n")?;
    let d = parse_kv(&lines, ln, tokens[1], "d")?;
    if d == 0 {
        return Err(lines.err(ln, "dimension must be positive"));
    }

    let mut samples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (ln, row) = lines.next("a sample row")?;
        let tokens: Vec<&str> = row.split_whitespace().collect();
        let label = tokens[0]
            .parse::<i64>()
            .ok()
            .and_then(Label::from_sign)
            .ok_or_else(|| lines.err(ln, format!("label must be +1 or -1, found `{}`", tokens[0])))?;
        let entries = parse_entries(&lines, ln, &tokens[1..], d * d)?;
        samples.push(to_spd(d, &entries, Some(i))?);
        labels.push(label);
    }
    lines.expect_end()?;
    LabeledSpdDataset::new(samples, labels)
}

pub fn parse_matrix(text: &str, path: &Path) -> Result<SpdMatrix> {
    let mut lines = Lines::new(path, text);
    let (ln, magic) = lines.next("header")?;
    if magic != MATRIX_MAGIC {
        return Err(lines.err(ln, format!("expected `{MATRIX_MAGIC}` header")));
    }
    let (ln, dim) = lines.next("`d=<dim>`")?;
    let d = parse_kv(&lines, ln, dim, "d")?;
    if d == 0 {
        return Err(lines.err(ln, "dimension must be positive"));
    }
    let mut entries = Vec::with_capacity(d * d);
    for _ in 0..d {
        let (ln, row) = lines.next("a matrix row")?;
        let tokens: Vec<&str> = row.split_whitespace().collect();
        entries.extend(parse_entries(&lines, ln, &tokens, d)?);
    }
    lines.expect_end()?;
    to_spd(d, &entries, None)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: PathBuf::from(path),
        source,
    })
}

pub fn dataset_read(path: impl AsRef<Path>) -> Result<LabeledSpdDataset> {
    let path = path.as_ref();
    parse_dataset(&read(path)?, path)
}

pub fn dataset_write(ds: &LabeledSpdDataset, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &format_dataset(ds))
}

pub fn matrix_read(path: impl AsRef<Path>) -> Result<SpdMatrix> {
    let path = path.as_ref();
    parse_matrix(&read(path)?, path)
}

pub fn matrix_write(m: &SpdMatrix, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &format_matrix(m))
}
