//! Coupling diagnostics: how a constrained fit departs from its base network.

use std::io::Write;

use crate::constraints::{distance, ConstraintSpec};
use crate::error::{invalid, Error, Result};
use crate::gcnn::{blend_terms, predict_constrained, GcnnModel};
use crate::numerics::Matrix;
use crate::rbf::RbfModel;

/// Decomposition of a blended prediction on a grid.
///
/// `f0` is the raw network output, `gs = Psi f_C` the original coupling term
/// (so `f = (1 - Psi) f0 + gs`) and `Gs = Psi (f_C - f0)` the alternative one
/// (so `f = f0 + Gs`). `fm` is filled when an unconstrained reference is given.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingReport {
    pub grid: Matrix,
    pub f0: Vec<f64>,
    pub gs: Vec<f64>,
    pub big_gs: Vec<f64>,
    pub fm: Option<Vec<f64>>,
}

pub fn coupling_decompose(model: &GcnnModel, grid: &Matrix, reference: Option<&RbfModel>) -> Result<CouplingReport> {
    if !model.scheme().is_blended() {
        return Err(Error::Unsupported(format!(
            "scheme {} has no explicit coupling form; use generic_modification",
            model.scheme()
        )));
    }
    if !model.is_fitted() {
        return Err(Error::NotFitted);
    }
    let f0 = model.base().predict(grid)?;
    let (psi, target) = blend_terms(model.specs(), grid)?;
    let gs = psi.iter().zip(&target).map(|(p, t)| p * t).collect();
    let big_gs = psi
        .iter()
        .zip(target.iter().zip(&f0))
        .map(|(p, (t, f))| p * (t - f))
        .collect();
    let fm = reference.map(|r| generic_modification(model, r, grid)).transpose()?;
    Ok(CouplingReport {
        grid: grid.clone(),
        f0,
        gs,
        big_gs,
        fm,
    })
}

fn check_pair(constrained: &GcnnModel, unconstrained: &RbfModel) -> Result<()> {
    if constrained.base().same_architecture(unconstrained) {
        Ok(())
    } else {
        Err(invalid(
            "constrained and unconstrained models must share centers and widths",
        ))
    }
}

/// `f(x) - f_wc(x)`: the constrained prediction minus the paired
/// unconstrained network on the same grid.
pub fn generic_modification(constrained: &GcnnModel, unconstrained: &RbfModel, grid: &Matrix) -> Result<Vec<f64>> {
    check_pair(constrained, unconstrained)?;
    let f = predict_constrained(constrained, grid)?;
    let f_wc = unconstrained.predict(grid)?;
    Ok(f.iter().zip(&f_wc).map(|(a, b)| a - b).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightChangeReport {
    /// `W_constrained - W_unconstrained`; entry 0 is the bias.
    pub delta_w: Vec<f64>,
    /// `delta_w / max |delta_w|`, or all zeros when `all_zero` is set.
    pub normalized: Vec<f64>,
    /// Center of neuron `j` is row `j - 1`.
    pub center_coords: Matrix,
    pub all_zero: bool,
}

impl WeightChangeReport {
    /// Center index (0-based, bias excluded) with the largest normalized change.
    pub fn peak_center(&self) -> Option<usize> {
        if self.all_zero {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        for (j, v) in self.normalized.iter().enumerate().skip(1) {
            if best.is_none_or(|(_, b)| v.abs() > b) {
                best = Some((j - 1, v.abs()));
            }
        }
        best.map(|(j, _)| j)
    }
}

pub fn weight_changes(constrained: &GcnnModel, unconstrained: &RbfModel) -> Result<WeightChangeReport> {
    check_pair(constrained, unconstrained)?;
    let delta: Vec<f64> = constrained
        .weights()
        .iter()
        .zip(unconstrained.weights().iter())
        .map(|(a, b)| a - b)
        .collect();
    let peak = delta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let all_zero = peak == 0.0;
    let normalized = if all_zero {
        vec![0.0; delta.len()]
    } else {
        delta.iter().map(|v| v / peak).collect()
    };
    Ok(WeightChangeReport {
        delta_w: delta,
        normalized,
        center_coords: unconstrained.centers().clone(),
        all_zero,
    })
}

/// Share of `sum |fm|` on grid points lying within `10 gamma` of one of
/// `specs`. `None` when `fm` vanishes on the grid.
pub fn locality_ratio(specs: &[ConstraintSpec], grid: &Matrix, fm: &[f64]) -> Result<Option<f64>> {
    if fm.len() != grid.nrows() {
        return Err(invalid("fm must have one entry per grid point"));
    }
    let mut near = 0.0;
    let mut total = 0.0;
    for (i, v) in fm.iter().enumerate() {
        let row: Vec<f64> = grid.row(i).iter().cloned().collect();
        let mut inside = false;
        for spec in specs {
            if distance(&spec.set, &row)? <= 10.0 * spec.gamma() {
                inside = true;
                break;
            }
        }
        total += v.abs();
        if inside {
            near += v.abs();
        }
    }
    Ok(if total > 0.0 { Some(near / total) } else { None })
}

fn coord_header(d: usize, prefix: &str) -> Vec<String> {
    (0..d).map(|k| format!("{prefix}{k}")).collect()
}

/// Columns `x0.., f0, gs, Gs, fm`; `gs`/`Gs`/`fm` are left empty when absent.
pub fn write_coupling_csv<W: Write>(out: &mut W, report: &CouplingReport) -> Result<()> {
    let mut header = coord_header(report.grid.ncols(), "x");
    header.extend(["f0", "gs", "Gs", "fm"].map(String::from));
    writeln!(out, "{}", header.join(","))?;
    for i in 0..report.grid.nrows() {
        let mut cells: Vec<String> = report.grid.row(i).iter().map(|v| format!("{v:e}")).collect();
        cells.push(format!("{:e}", report.f0[i]));
        cells.push(format!("{:e}", report.gs[i]));
        cells.push(format!("{:e}", report.big_gs[i]));
        cells.push(report.fm.as_ref().map(|f| format!("{:e}", f[i])).unwrap_or_default());
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Columns `x0.., fm` for schemes without an explicit coupling form.
pub fn write_modification_csv<W: Write>(out: &mut W, grid: &Matrix, fm: &[f64]) -> Result<()> {
    let mut header = coord_header(grid.ncols(), "x");
    header.push("fm".into());
    writeln!(out, "{}", header.join(","))?;
    for (i, v) in fm.iter().enumerate() {
        let mut cells: Vec<String> = grid.row(i).iter().map(|c| format!("{c:e}")).collect();
        cells.push(format!("{v:e}"));
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Columns `center_index, c0.., delta_w, normalized`; the bias row has
/// index `bias` and empty coordinates.
pub fn write_weights_csv<W: Write>(out: &mut W, report: &WeightChangeReport) -> Result<()> {
    let d = report.center_coords.ncols();
    let mut header = vec!["center_index".to_string()];
    header.extend(coord_header(d, "c"));
    header.extend(["delta_w", "normalized"].map(String::from));
    writeln!(out, "{}", header.join(","))?;
    for (j, (dw, nw)) in report.delta_w.iter().zip(&report.normalized).enumerate() {
        let mut cells = Vec::with_capacity(d + 3);
        if j == 0 {
            cells.push("bias".to_string());
            cells.extend(std::iter::repeat_n(String::new(), d));
        } else {
            cells.push((j - 1).to_string());
            cells.extend(report.center_coords.row(j - 1).iter().map(|c| format!("{c:e}")));
        }
        cells.push(format!("{dw:e}"));
        cells.push(format!("{nw:e}"));
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}
