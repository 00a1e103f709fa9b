//! Plain-text model files.
//!
//! ```text
//! <m> <d>
//! <center 1: d numbers>
//! ...
//! <center m>
//! <m widths>
//! <m+1 weights, bias first>
//! ```
//!
//! A constrained model appends `scheme <tag>` and one `constraint <descriptor>`
//! line per constraint. Numbers are written in shortest round-trip form, so
//! reading a file back yields bit-identical parameters.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::constraints::{ConstraintSet, ConstraintSpec};
use crate::error::{Error, Result};
use crate::gcnn::{GcnnModel, Scheme};
use crate::numerics::{Matrix, Vector};
use crate::rbf::RbfModel;

fn write_row<W: Write>(out: &mut W, values: impl Iterator<Item = f64>) -> Result<()> {
    let cells: Vec<String> = values.map(|v| format!("{v:e}")).collect();
    writeln!(out, "{}", cells.join(" "))?;
    Ok(())
}

pub fn write_model<W: Write>(out: &mut W, model: &RbfModel) -> Result<()> {
    writeln!(out, "{} {}", model.n_centers(), model.dim())?;
    for j in 0..model.n_centers() {
        write_row(out, model.centers().row(j).iter().cloned())?;
    }
    write_row(out, model.widths().iter().cloned())?;
    write_row(out, model.weights().iter().cloned())?;
    Ok(())
}

pub fn write_gcnn<W: Write>(out: &mut W, model: &GcnnModel) -> Result<()> {
    if !model.is_fitted() {
        return Err(Error::NotFitted);
    }
    if model.specs().iter().any(|s| matches!(s.set, ConstraintSet::Region(_))) {
        return Err(Error::Unsupported("region constraint sets cannot be serialized".into()));
    }
    write_model(out, model.base())?;
    writeln!(out, "scheme {}", model.scheme())?;
    for spec in model.specs() {
        writeln!(out, "constraint {spec}")?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<Option<String>> {
        loop {
            match self.inner.next() {
                None => return Ok(None),
                Some(l) => {
                    self.line += 1;
                    let l = l?;
                    if !l.trim().is_empty() {
                        return Ok(Some(l));
                    }
                }
            }
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn numbers(&mut self, expected: usize, what: &str) -> Result<Vec<f64>> {
        let l = self.next_line()?.ok_or_else(|| self.err(format!("missing {what}")))?;
        let vals = l
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| self.err(format!("bad number '{t}' in {what}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != expected {
            return Err(self.err(format!("{what} has {} values, expected {expected}", vals.len())));
        }
        Ok(vals)
    }
}

fn read_base<R: BufRead>(lines: &mut Lines<R>) -> Result<RbfModel> {
    let header = lines.next_line()?.ok_or_else(|| lines.err("empty model file"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| lines.err(format!("bad header token '{t}'"))))
        .collect::<Result<_>>()?;
    let [m, d] = dims[..] else {
        return Err(lines.err("header must be '<m> <d>'"));
    };
    let mut centers = Matrix::zeros(m, d);
    for j in 0..m {
        let row = lines.numbers(d, &format!("center {}", j + 1))?;
        for (k, v) in row.into_iter().enumerate() {
            centers[(j, k)] = v;
        }
    }
    let widths = lines.numbers(m, "widths")?;
    let weights = lines.numbers(m + 1, "weights")?;
    let line = lines.line;
    RbfModel::with_weights(centers, widths, Vector::from_vec(weights)).map_err(|e| Error::Parse {
        line,
        msg: e.to_string(),
    })
}

pub fn read_model<R: BufRead>(input: R) -> Result<RbfModel> {
    let mut lines = Lines {
        inner: input.lines(),
        line: 0,
    };
    let model = read_base(&mut lines)?;
    if let Some(extra) = lines.next_line()? {
        return Err(lines.err(format!("unexpected trailing line '{extra}'")));
    }
    Ok(model)
}

/// Reads a model file; a file without a `scheme` line is an unconstrained fit.
pub fn read_gcnn<R: BufRead>(input: R) -> Result<GcnnModel> {
    let mut lines = Lines {
        inner: input.lines(),
        line: 0,
    };
    let base = read_base(&mut lines)?;
    let mut scheme = None;
    let mut specs = Vec::new();
    while let Some(l) = lines.next_line()? {
        let (key, rest) = l.trim().split_once(' ').unwrap_or((l.trim(), ""));
        match key {
            "scheme" if scheme.is_none() => {
                scheme = Some(rest.parse::<Scheme>().map_err(|e| lines.err(e.to_string()))?)
            }
            "constraint" => specs.push(rest.parse::<ConstraintSpec>().map_err(|e| lines.err(e.to_string()))?),
            other => return Err(lines.err(format!("unexpected line starting with '{other}'"))),
        }
    }
    let line = lines.line;
    GcnnModel::fitted(base, specs, scheme.unwrap_or(Scheme::Unconstrained)).map_err(|e| Error::Parse {
        line,
        msg: e.to_string(),
    })
}

pub fn save_gcnn(path: &Path, model: &GcnnModel) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_gcnn(&mut out, model)?;
    out.flush()?;
    Ok(())
}

pub fn load_gcnn(path: &Path) -> Result<GcnnModel> {
    read_gcnn(BufReader::new(File::open(path)?))
}
