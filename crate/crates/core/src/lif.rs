//! Locally imposing function: a Cauchy profile in the distance to the
//! constraint set, normalized so its peak is exactly one.
//!
//! With the Cauchy density `1 / (pi g (1 + (d/g)^2))` divided by its peak
//! value `1 / (pi g)`, the weight reduces to `1 / (1 + (d/g)^2)`. It is
//! evaluated in that reduced form so `psi(0, g) == 1.0` holds bit-for-bit.

use crate::constraints::{distance, distance_partial, ConstraintSet, ConstraintSpec, ConstraintTarget, TargetKind};
use crate::error::{invalid, Result};

fn check(delta: f64, gamma: f64) -> Result<()> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(invalid(format!("distance must be finite and nonnegative, got {delta}")));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(invalid(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

/// `Psi(delta; gamma)` in `(0, 1]`.
pub fn psi(delta: f64, gamma: f64) -> Result<f64> {
    check(delta, gamma)?;
    let r = delta / gamma;
    Ok(1.0 / (1.0 + r * r))
}

/// `d Psi / d delta`.
pub fn psi_derivative(delta: f64, gamma: f64) -> Result<f64> {
    check(delta, gamma)?;
    let r = delta / gamma;
    let q = 1.0 + r * r;
    Ok(-2.0 * r / (gamma * q * q))
}

/// Combined LIF weight of several constraints at `x`: the largest individual
/// weight, together with the index of the constraint that attains it (lowest
/// index on ties). On any constraint set the weight is exactly one.
pub fn aggregate_psi(specs: &[ConstraintSpec], x: &[f64]) -> Result<(f64, usize)> {
    if specs.is_empty() {
        return Err(invalid("aggregate_psi needs at least one constraint"));
    }
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, spec) in specs.iter().enumerate() {
        let w = psi(distance(&spec.set, x)?, spec.gamma())?;
        if w > best.0 {
            best = (w, i);
        }
    }
    Ok(best)
}

/// `d Psi_active / d x_axis` for the constraint selected by [`aggregate_psi`].
pub fn aggregate_psi_partial(specs: &[ConstraintSpec], x: &[f64], axis: usize) -> Result<f64> {
    let (_, active) = aggregate_psi(specs, x)?;
    let spec = &specs[active];
    let delta = distance(&spec.set, x)?;
    Ok(psi_derivative(delta, spec.gamma())? * distance_partial(&spec.set, x, axis)?)
}

fn targets_agree(a: &ConstraintSpec, b: &ConstraintSpec, x: &[f64]) -> Result<bool> {
    let close = |p: f64, q: f64| (p - q).abs() <= 1e-12 * p.abs().max(q.abs()).max(1.0);
    if let (Some(fa), Some(fb)) = (a.value_fn(), b.value_fn()) {
        return Ok(close(fa.eval(x), fb.eval(x)));
    }
    match (&a.target, &b.target) {
        (
            ConstraintTarget::Derivative { axis: ka, g: ga }
            | ConstraintTarget::DerivativeIntegrated { axis: ka, g: ga, .. },
            ConstraintTarget::Derivative { axis: kb, g: gb }
            | ConstraintTarget::DerivativeIntegrated { axis: kb, g: gb, .. },
        ) if ka == kb => Ok(close(ga.eval(x), gb.eval(x))),
        // Value and derivative constraints never contradict each other.
        _ => Ok(true),
    }
}

/// Points of `a` that also lie on `b`, used to look for contradictions.
fn shared_points(a: &ConstraintSet, b: &ConstraintSet, d: usize) -> Result<Vec<Vec<f64>>> {
    const FREE: [f64; 5] = [-1.0, 0.0, 0.25, 0.5, 1.0];
    let mut out = Vec::new();
    match (a, b) {
        (ConstraintSet::Points(pts), other) | (other, ConstraintSet::Points(pts)) => {
            for p in pts {
                if distance(other, p)? == 0.0 {
                    out.push(p.clone());
                }
            }
        }
        (ConstraintSet::Plane { axis: aa, level: la }, ConstraintSet::Plane { axis: ab, level: lb }) => {
            if aa == ab && la != lb {
                return Ok(out);
            }
            // Sample the intersection on a small grid of free coordinates.
            let free: Vec<usize> = (0..d).filter(|k| k != aa && k != ab).collect();
            let count = FREE.len().pow(free.len() as u32);
            for mut idx in 0..count {
                let mut x = vec![0.0; d];
                x[*aa] = *la;
                x[*ab] = *lb;
                for &k in &free {
                    x[k] = FREE[idx % FREE.len()];
                    idx /= FREE.len();
                }
                out.push(x);
            }
        }
        _ => {}
    }
    Ok(out)
}

/// Rejects constraint lists that prescribe different targets at the same
/// location, and checks every spec against the input dimension.
pub fn validate_specs(specs: &[ConstraintSpec], d: usize) -> Result<()> {
    for spec in specs {
        spec.check_dim(d)?;
    }
    for i in 0..specs.len() {
        for j in i + 1..specs.len() {
            let (a, b) = (&specs[i], &specs[j]);
            if a.target.kind() == TargetKind::Derivative && b.target.kind() != TargetKind::Derivative
                || b.target.kind() == TargetKind::Derivative && a.target.kind() != TargetKind::Derivative
            {
                continue;
            }
            for x in shared_points(&a.set, &b.set, d)? {
                if !targets_agree(a, b, &x)? {
                    return Err(invalid(format!(
                        "constraints {i} and {j} prescribe different targets at {x:?}"
                    )));
                }
            }
        }
    }
    Ok(())
}
