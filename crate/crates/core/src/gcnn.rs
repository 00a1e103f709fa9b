//! Constrained RBF fitters.
//!
//! Locally imposed constraints blend the network output with the constraint
//! target through the LIF weight `Psi`:
//!
//! ```text
//! f_WC(x) = (1 - Psi(x)) * Phi(x) W + Psi(x) * f_C(x)
//! ```
//!
//! so wherever `Psi = 1` (on the constraint set) the prediction equals the
//! target regardless of `W`. Only `W` is solved for; centers and widths are
//! preset. The globally imposed baseline solves the equality-constrained
//! least-squares problem through its KKT system instead.

use std::fmt;
use std::str::FromStr;

use crate::constraints::{ConstraintSet, ConstraintSpec, ConstraintTarget, TargetFn, TargetKind};
use crate::error::{invalid, Error, Result};
use crate::lif::{aggregate_psi, aggregate_psi_partial, validate_specs};
use crate::numerics::{scale_rows, solve_kkt, weighted_least_squares, Matrix, Vector};
use crate::rbf::RbfModel;

/// Constraint residual above which a KKT solution counts as infeasible.
const GIS_FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Unconstrained,
    LisValue,
    LisDerivative,
    LisDerivativeIntegrated,
    GisLagrange,
}

impl Scheme {
    /// Whether predictions blend the network with a value-form target.
    pub fn is_blended(&self) -> bool {
        matches!(self, Scheme::LisValue | Scheme::LisDerivativeIntegrated)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Unconstrained => "unconstrained",
            Scheme::LisValue => "lis-value",
            Scheme::LisDerivative => "lis-derivative",
            Scheme::LisDerivativeIntegrated => "lis-integrated",
            Scheme::GisLagrange => "gis-lagrange",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "unconstrained" => Ok(Scheme::Unconstrained),
            "lis-value" => Ok(Scheme::LisValue),
            "lis-derivative" => Ok(Scheme::LisDerivative),
            "lis-integrated" => Ok(Scheme::LisDerivativeIntegrated),
            "gis-lagrange" => Ok(Scheme::GisLagrange),
            other => Err(invalid(format!("unknown scheme '{other}'"))),
        }
    }
}

/// An RBF network paired with the constraints it was fitted under.
#[derive(Debug, Clone)]
pub struct GcnnModel {
    base: RbfModel,
    specs: Vec<ConstraintSpec>,
    scheme: Scheme,
    fitted: bool,
}

impl GcnnModel {
    /// An unfitted model; predictions fail until weights are solved.
    pub fn new(base: RbfModel, specs: Vec<ConstraintSpec>, scheme: Scheme) -> Result<Self> {
        check_scheme(&specs, scheme)?;
        validate_specs(&specs, base.dim())?;
        Ok(Self {
            base,
            specs,
            scheme,
            fitted: false,
        })
    }

    /// A model whose weights are already final, e.g. read back from disk.
    pub fn fitted(base: RbfModel, specs: Vec<ConstraintSpec>, scheme: Scheme) -> Result<Self> {
        let mut model = Self::new(base, specs, scheme)?;
        model.fitted = true;
        Ok(model)
    }

    pub fn base(&self) -> &RbfModel {
        &self.base
    }

    pub fn specs(&self) -> &[ConstraintSpec] {
        &self.specs
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted
    }

    pub fn weights(&self) -> &Vector {
        self.base.weights()
    }
}

fn check_scheme(specs: &[ConstraintSpec], scheme: Scheme) -> Result<()> {
    let ok = specs.iter().all(|s| match scheme {
        Scheme::Unconstrained => false,
        Scheme::LisValue => s.target.kind() == TargetKind::Value,
        Scheme::LisDerivative => s.target.kind() != TargetKind::Value,
        Scheme::LisDerivativeIntegrated => s.value_fn().is_some(),
        Scheme::GisLagrange => {
            matches!(s.set, ConstraintSet::Points(ref p) if p.len() == 1) && s.target.kind() == TargetKind::Value
        }
    });
    if ok {
        Ok(())
    } else {
        Err(invalid(format!(
            "constraint targets are inconsistent with scheme {scheme}"
        )))
    }
}

fn rows(x: &Matrix) -> impl Iterator<Item = Vec<f64>> + '_ {
    (0..x.nrows()).map(move |i| x.row(i).iter().cloned().collect())
}

/// Per-row LIF weight and blended target at each row of `x`. With no
/// constraints the weights are zero.
pub fn blend_terms(specs: &[ConstraintSpec], x: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = x.nrows();
    if specs.is_empty() {
        return Ok((vec![0.0; n], vec![0.0; n]));
    }
    let mut psi = Vec::with_capacity(n);
    let mut target = Vec::with_capacity(n);
    for row in rows(x) {
        let (w, active) = aggregate_psi(specs, &row)?;
        psi.push(w);
        target.push(specs[active].value_at(&row)?);
    }
    Ok((psi, target))
}

fn check_data(x: &Matrix, y: &[f64], base: &RbfModel) -> Result<()> {
    if x.nrows() == 0 {
        return Err(invalid("cannot fit on an empty data set"));
    }
    if y.len() != x.nrows() {
        return Err(invalid(format!("{} inputs but {} targets", x.nrows(), y.len())));
    }
    if x.ncols() != base.dim() {
        return Err(invalid(format!(
            "inputs have {} columns but the model expects {}",
            x.ncols(),
            base.dim()
        )));
    }
    Ok(())
}

/// Unconstrained fit wrapped as a [`GcnnModel`].
pub fn fit_unconstrained(x: &Matrix, y: &[f64], base: &RbfModel) -> Result<GcnnModel> {
    check_data(x, y, base)?;
    GcnnModel::fitted(base.fit_unconstrained(x, y)?, Vec::new(), Scheme::Unconstrained)
}

/// Minimizes `|y - f_WC(X)|^2` over `W` for value constraints.
///
/// With `D = diag(1 - Psi(x_i))` the objective is `|(y - Psi o f_C) - D Phi W|^2`,
/// an ordinary least-squares problem in the row-scaled design `D Phi`.
/// Rows on the constraint set get `D_ii = 0` and drop out.
pub fn fit_lis_value(x: &Matrix, y: &[f64], base: &RbfModel, specs: &[ConstraintSpec]) -> Result<GcnnModel> {
    if let Some(s) = specs.iter().find(|s| s.target.kind() != TargetKind::Value) {
        return Err(invalid(format!("value fit got a non-value target: {}", s.target)));
    }
    fit_blended(x, y, base, specs, Scheme::LisValue)
}

fn fit_blended(x: &Matrix, y: &[f64], base: &RbfModel, specs: &[ConstraintSpec], scheme: Scheme) -> Result<GcnnModel> {
    check_data(x, y, base)?;
    validate_specs(specs, base.dim())?;
    let phi = base.feature_map(x)?;
    let (psi, target) = blend_terms(specs, x)?;
    let keep: Vec<f64> = psi.iter().map(|p| 1.0 - p).collect();
    let design = scale_rows(&phi, &keep);
    let rhs: Vec<f64> = y
        .iter()
        .zip(psi.iter().zip(&target))
        .map(|(yi, (p, t))| yi - p * t)
        .collect();
    let w = weighted_least_squares(&design, &rhs, &vec![1.0; rhs.len()])?;
    let scheme = if specs.is_empty() {
        Scheme::Unconstrained
    } else {
        scheme
    };
    GcnnModel::fitted(base.replace_weights(w)?, specs.to_vec(), scheme)
}

/// Soft derivative constraints along `axis`: minimizes
/// `sum_i (1 - Psi_i)(y_i - f(x_i))^2 + sum_i Psi_i (df/dx_axis(x_i) - g(x_i))^2`
/// with the derivative target `g` taken from the active constraint and
/// extended off the constraint set by projection.
pub fn fit_lis_derivative(
    x: &Matrix,
    y: &[f64],
    base: &RbfModel,
    specs: &[ConstraintSpec],
    axis: usize,
) -> Result<GcnnModel> {
    check_data(x, y, base)?;
    if let Some(s) = specs.iter().find(|s| s.target.kind() == TargetKind::Value) {
        return Err(invalid(format!("derivative fit got a value target: {}", s.target)));
    }
    validate_specs(specs, base.dim())?;
    let phi = base.feature_map(x)?;
    if specs.is_empty() {
        let w = weighted_least_squares(&phi, y, &vec![1.0; y.len()])?;
        return GcnnModel::fitted(base.replace_weights(w)?, Vec::new(), Scheme::Unconstrained);
    }
    let dphi = base.feature_map_derivative(x, axis)?;
    let n = x.nrows();
    let cols = phi.ncols();

    let mut design = Matrix::zeros(2 * n, cols);
    design.rows_mut(0, n).copy_from(&phi);
    design.rows_mut(n, n).copy_from(&dphi);
    let mut rhs = y.to_vec();
    let mut weights = Vec::with_capacity(2 * n);
    let mut deriv_weights = Vec::with_capacity(n);
    for row in rows(x) {
        let (psi, active) = aggregate_psi(specs, &row)?;
        let (k, g) = specs[active].derivative_target_at(&row)?;
        if k != axis {
            return Err(invalid(format!(
                "constraint derivative axis {k} differs from requested axis {axis}"
            )));
        }
        weights.push(1.0 - psi);
        deriv_weights.push(psi);
        rhs.push(g);
    }
    weights.extend(deriv_weights);
    let w = weighted_least_squares(&design, &rhs, &weights)?;
    GcnnModel::fitted(base.replace_weights(w)?, specs.to_vec(), Scheme::LisDerivative)
}

/// Integrable derivative constraints: each target is replaced by its known
/// antiderivative and fitted as a value constraint. The integration constant
/// is absorbed by the bias weight.
pub fn fit_lis_integrated(x: &Matrix, y: &[f64], base: &RbfModel, specs: &[ConstraintSpec]) -> Result<GcnnModel> {
    for s in specs {
        match &s.target {
            ConstraintTarget::DerivativeIntegrated {
                antiderivative: None, ..
            } => {
                return Err(invalid("integrated derivative target is missing its antiderivative"));
            }
            ConstraintTarget::DerivativeIntegrated { .. } => {}
            other => return Err(invalid(format!("integrated fit needs derivative targets, got {other}"))),
        }
    }
    fit_blended(x, y, base, specs, Scheme::LisDerivativeIntegrated)
}

/// Lagrange-multiplier baseline: least squares subject to `f(p_c) = v_c` at
/// every constraint point.
pub fn fit_gis_lagrange(
    x: &Matrix,
    y: &[f64],
    base: &RbfModel,
    point_constraints: &[(Vec<f64>, f64)],
) -> Result<GcnnModel> {
    check_data(x, y, base)?;
    let m1 = base.n_centers() + 1;
    if point_constraints.len() > m1 {
        return Err(Error::Infeasible(format!(
            "{} point constraints exceed the {m1} free weights",
            point_constraints.len()
        )));
    }
    let d = base.dim();
    let mut cx = Matrix::zeros(point_constraints.len(), d);
    let mut cv = Vec::with_capacity(point_constraints.len());
    for (i, (p, v)) in point_constraints.iter().enumerate() {
        if p.len() != d {
            return Err(invalid(format!(
                "constraint point {i} has dimension {} but inputs have {d}",
                p.len()
            )));
        }
        if !v.is_finite() {
            return Err(invalid(format!("constraint value {i} is not finite")));
        }
        for k in 0..d {
            cx[(i, k)] = p[k];
        }
        cv.push(*v);
    }
    let phi = base.feature_map(x)?;
    let gram = phi.tr_mul(&phi);
    let rhs = phi.tr_mul(&Vector::from_column_slice(y));
    let a = base.feature_map(&cx)?;
    let sol = solve_kkt(&gram, rhs.as_slice(), &a, &cv)?;
    if sol.constraint_residual > GIS_FEASIBILITY_TOL {
        return Err(Error::Infeasible(format!(
            "point constraints cannot be met by the network (residual {:e})",
            sol.constraint_residual
        )));
    }
    let specs = point_constraints
        .iter()
        .map(|(p, v)| {
            ConstraintSpec::new(
                ConstraintSet::points(vec![p.clone()])?,
                ConstraintTarget::Value(TargetFn::Constant(*v)),
                1.0,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let scheme = if specs.is_empty() {
        Scheme::Unconstrained
    } else {
        Scheme::GisLagrange
    };
    GcnnModel::fitted(base.replace_weights(sol.weights)?, specs, scheme)
}

/// Weights of the unconstrained network sharing `base`'s centers and widths;
/// the reference point for weight-change comparisons.
pub fn initial_weights_from_unconstrained(x: &Matrix, y: &[f64], base: &RbfModel) -> Result<Vector> {
    check_data(x, y, base)?;
    Ok(base.fit_unconstrained(x, y)?.weights().clone())
}

/// Model output, blended with the constraint target for LIS value schemes.
pub fn predict_constrained(model: &GcnnModel, x: &Matrix) -> Result<Vec<f64>> {
    if !model.fitted {
        return Err(Error::NotFitted);
    }
    let f = model.base.predict(x)?;
    if !model.scheme.is_blended() || model.specs.is_empty() {
        return Ok(f);
    }
    let (psi, target) = blend_terms(&model.specs, x)?;
    Ok(f.iter()
        .zip(psi.iter().zip(&target))
        .map(|(fi, (p, t))| (1.0 - p) * fi + p * t)
        .collect())
}

/// `d/dx_axis` of [`predict_constrained`].
pub fn predict_constrained_derivative(model: &GcnnModel, x: &Matrix, axis: usize) -> Result<Vec<f64>> {
    if !model.fitted {
        return Err(Error::NotFitted);
    }
    let df = model.base.predict_derivative(x, axis)?;
    if !model.scheme.is_blended() || model.specs.is_empty() {
        return Ok(df);
    }
    let f = model.base.predict(x)?;
    let mut out = Vec::with_capacity(x.nrows());
    for (i, row) in rows(x).enumerate() {
        let (psi, active) = aggregate_psi(&model.specs, &row)?;
        let spec = &model.specs[active];
        let t = spec.value_at(&row)?;
        let dt = spec.value_partial_at(&row, axis)?;
        let dpsi = aggregate_psi_partial(&model.specs, &row, axis)?;
        out.push((1.0 - psi) * df[i] + psi * dt + dpsi * (t - f[i]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lif::psi;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn base_1d(centers: &[f64], width: f64) -> RbfModel {
        RbfModel::new(
            Matrix::from_column_slice(centers.len(), 1, centers),
            vec![width; centers.len()],
        )
        .unwrap()
    }

    fn point_value(p: f64, v: f64, gamma: f64) -> ConstraintSpec {
        ConstraintSpec::new(
            ConstraintSet::points(vec![vec![p]]).unwrap(),
            ConstraintTarget::Value(TargetFn::Constant(v)),
            gamma,
        )
        .unwrap()
    }

    fn noisy_sine(n: usize, seed: u64) -> (Matrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Matrix::from_fn(n, 1, |i, _| -3.0 + 6.0 * i as f64 / (n - 1) as f64);
        let y = (0..n)
            .map(|i| x[(i, 0)].sin() + rng.random_range(-0.05..0.05))
            .collect();
        (x, y)
    }

    fn plane_cube_spec(gamma: f64) -> ConstraintSpec {
        ConstraintSpec::new(
            ConstraintSet::plane(0, 0.0).unwrap(),
            ConstraintTarget::Value(TargetFn::Monomial {
                axis: 1,
                coeff: 1.0,
                power: 3,
            }),
            gamma,
        )
        .unwrap()
    }

    fn grid_2d(k: usize) -> Matrix {
        Matrix::from_fn(k * k, 2, |i, c| {
            let idx = if c == 0 { i / k } else { i % k };
            idx as f64 / (k - 1) as f64
        })
    }

    #[test]
    fn exact_on_constraint_points() {
        let (x, y) = noisy_sine(20, 1);
        let base = base_1d(&[-2.0, -1.0, 0.0, 1.0, 2.0], 0.9);
        let specs = vec![point_value(0.5, 0.25, 0.3), point_value(-1.2, -0.8, 0.1)];
        let model = fit_lis_value(&x, &y, &base, &specs).unwrap();
        let q = Matrix::from_column_slice(2, 1, &[0.5, -1.2]);
        assert_eq!(predict_constrained(&model, &q).unwrap(), vec![0.25, -0.8]);
    }

    #[test]
    fn far_from_constraints_prediction_is_network_output() {
        let (x, y) = noisy_sine(20, 2);
        let base = base_1d(&[-2.0, 0.0, 2.0], 1.0);
        let specs = vec![point_value(0.0, 5.0, 1e-6)];
        let model = fit_lis_value(&x, &y, &base, &specs).unwrap();
        let q = Matrix::from_column_slice(3, 1, &[-2.5, 1.0, 2.9]);
        let blended = predict_constrained(&model, &q).unwrap();
        let raw = model.base().predict(&q).unwrap();
        for (b, r) in blended.iter().zip(&raw) {
            assert!((b - r).abs() < 1e-6);
        }
    }

    #[test]
    fn blended_prediction_matches_scalar_formula() {
        let (x, y) = noisy_sine(15, 3);
        let base = base_1d(&[-2.0, 0.0, 2.0], 1.2);
        let specs = vec![point_value(0.3, 1.0, 0.4)];
        let model = fit_lis_value(&x, &y, &base, &specs).unwrap();
        let w = model.weights();
        for &xq in &[-2.0, 0.0, 0.35, 1.7] {
            let mut f = w[0];
            for (j, c) in [-2.0f64, 0.0, 2.0].iter().enumerate() {
                f += w[j + 1] * (-(xq - c).powi(2) / 1.44).exp();
            }
            let p = 1.0 / (1.0 + ((xq - 0.3f64).abs() / 0.4).powi(2));
            let want = (1.0 - p) * f + p * 1.0;
            let got = predict_constrained(&model, &Matrix::from_column_slice(1, 1, &[xq])).unwrap()[0];
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn consistent_data_is_fitted_exactly() {
        // y = 2 everywhere, constraint f = 2 on a point: bias-only solution.
        let x = Matrix::from_column_slice(9, 1, &[-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0]);
        let y = vec![2.0; 9];
        let base = base_1d(&[-1.0, 1.0], 0.7);
        let model = fit_lis_value(&x, &y, &base, &[point_value(0.0, 2.0, 0.5)]).unwrap();
        let pred = predict_constrained(&model, &x).unwrap();
        assert!(pred.iter().all(|p| (p - 2.0).abs() < 1e-12));
    }

    #[test]
    fn value_fit_rejects_derivative_targets() {
        let (x, y) = noisy_sine(10, 4);
        let base = base_1d(&[0.0], 1.0);
        let spec = ConstraintSpec::new(
            ConstraintSet::points(vec![vec![0.0]]).unwrap(),
            ConstraintTarget::Derivative {
                axis: 0,
                g: TargetFn::Constant(1.0),
            },
            0.5,
        )
        .unwrap();
        assert!(fit_lis_value(&x, &y, &base, std::slice::from_ref(&spec)).is_err());
        assert!(fit_lis_derivative(&x, &y, &base, &[point_value(0.0, 1.0, 0.5)], 0).is_err());
        assert!(fit_lis_integrated(&x, &y, &base, &[spec]).is_err());
    }

    #[test]
    fn missing_antiderivative_rejected() {
        let (x, y) = noisy_sine(10, 5);
        let base = base_1d(&[0.0], 1.0);
        let spec = ConstraintSpec::new(
            ConstraintSet::points(vec![vec![0.0]]).unwrap(),
            ConstraintTarget::DerivativeIntegrated {
                axis: 0,
                g: TargetFn::Constant(0.0),
                antiderivative: None,
            },
            0.5,
        )
        .unwrap();
        assert!(matches!(
            fit_lis_integrated(&x, &y, &base, &[spec]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn zero_derivative_integrated_equals_constant_value_constraint() {
        let (x, y) = noisy_sine(25, 6);
        let base = base_1d(&[-2.0, -1.0, 0.0, 1.0, 2.0], 0.8);
        let integrated = ConstraintSpec::new(
            ConstraintSet::points(vec![vec![0.4]]).unwrap(),
            ConstraintTarget::DerivativeIntegrated {
                axis: 0,
                g: TargetFn::Constant(0.0),
                antiderivative: Some(TargetFn::Constant(0.7)),
            },
            0.3,
        )
        .unwrap();
        let a = fit_lis_integrated(&x, &y, &base, &[integrated]).unwrap();
        let b = fit_lis_value(&x, &y, &base, &[point_value(0.4, 0.7, 0.3)]).unwrap();
        assert!((a.weights() - b.weights()).amax() < 1e-12);
        assert_eq!(a.scheme(), Scheme::LisDerivativeIntegrated);
    }

    #[test]
    fn every_fitter_reduces_without_constraints() {
        let (x, y) = noisy_sine(30, 7);
        let base = base_1d(&[-2.0, -1.0, 0.0, 1.0, 2.0], 0.8);
        let plain = base.fit_unconstrained(&x, &y).unwrap();
        let fits = [
            fit_lis_value(&x, &y, &base, &[]).unwrap(),
            fit_lis_derivative(&x, &y, &base, &[], 0).unwrap(),
            fit_lis_integrated(&x, &y, &base, &[]).unwrap(),
            fit_gis_lagrange(&x, &y, &base, &[]).unwrap(),
        ];
        for fit in &fits {
            assert!((fit.weights() - plain.weights()).amax() < 1e-10);
        }
    }

    #[test]
    fn negligible_psi_derivative_fit_reduces() {
        let (x, y) = noisy_sine(30, 8);
        let base = base_1d(&[-2.0, 0.0, 2.0], 1.0);
        let spec = ConstraintSpec::new(
            ConstraintSet::points(vec![vec![100.0]]).unwrap(),
            ConstraintTarget::Derivative {
                axis: 0,
                g: TargetFn::Constant(3.0),
            },
            1e-9,
        )
        .unwrap();
        let fit = fit_lis_derivative(&x, &y, &base, &[spec], 0).unwrap();
        let plain = base.fit_unconstrained(&x, &y).unwrap();
        assert!((fit.weights() - plain.weights()).amax() < 1e-10);
    }

    #[test]
    fn gis_meets_constraints() {
        let (x, y) = noisy_sine(30, 9);
        let base = base_1d(&[-2.0, -1.0, 0.0, 1.0, 2.0], 0.8);
        let pc = vec![(vec![0.0], 0.0), (vec![1.5], 1.5f64.sin())];
        let model = fit_gis_lagrange(&x, &y, &base, &pc).unwrap();
        let q = Matrix::from_column_slice(2, 1, &[0.0, 1.5]);
        let pred = predict_constrained(&model, &q).unwrap();
        assert!((pred[0] - 0.0).abs() < 1e-10);
        assert!((pred[1] - 1.5f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn gis_inactive_constraint_leaves_weights() {
        let (x, y) = noisy_sine(30, 10);
        let base = base_1d(&[-2.0, -1.0, 0.0, 1.0, 2.0], 0.8);
        let plain = base.fit_unconstrained(&x, &y).unwrap();
        let at = 0.7;
        let v = plain.predict(&Matrix::from_column_slice(1, 1, &[at])).unwrap()[0];
        let model = fit_gis_lagrange(&x, &y, &base, &[(vec![at], v)]).unwrap();
        assert!((model.weights() - plain.weights()).amax() < 1e-8);
    }

    #[test]
    fn gis_too_many_constraints_is_infeasible() {
        let (x, y) = noisy_sine(10, 11);
        let base = base_1d(&[0.0], 1.0);
        let pc = vec![(vec![0.0], 1.0), (vec![1.0], 0.0), (vec![2.0], 5.0)];
        assert!(matches!(
            fit_gis_lagrange(&x, &y, &base, &pc),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn unfitted_model_cannot_predict() {
        let base = base_1d(&[0.0], 1.0);
        let model = GcnnModel::new(base, vec![point_value(0.0, 1.0, 0.1)], Scheme::LisValue).unwrap();
        assert!(matches!(
            predict_constrained(&model, &Matrix::zeros(1, 1)),
            Err(Error::NotFitted)
        ));
    }

    #[test]
    fn scheme_must_match_targets() {
        let base = base_1d(&[0.0], 1.0);
        assert!(GcnnModel::new(base, vec![point_value(0.0, 1.0, 0.1)], Scheme::LisDerivative).is_err());
    }

    #[test]
    fn value_fit_is_affine_in_targets() {
        let (x, y1) = noisy_sine(20, 12);
        let (_, y2) = noisy_sine(20, 13);
        let base = base_1d(&[-2.0, 0.0, 2.0], 1.1);
        let specs = [point_value(0.2, 0.5, 0.3)];
        let fit = |y: &[f64]| fit_lis_value(&x, y, &base, &specs).unwrap().weights().clone();
        let y3: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| 0.3 * a + 0.7 * b).collect();
        let combo = fit(&y1) * 0.3 + fit(&y2) * 0.7;
        assert!((fit(&y3) - combo).amax() < 1e-10);
    }

    #[test]
    fn value_fit_objective_is_minimal() {
        let (x, y) = noisy_sine(25, 14);
        let base = base_1d(&[-2.0, -1.0, 0.0, 1.0, 2.0], 0.8);
        let specs = vec![point_value(0.3, 0.2, 0.4)];
        let model = fit_lis_value(&x, &y, &base, &specs).unwrap();
        let loss = |w: &Vector| {
            let m = GcnnModel::fitted(
                base.replace_weights(w.clone()).unwrap(),
                specs.clone(),
                Scheme::LisValue,
            )
            .unwrap();
            let p = predict_constrained(&m, &x).unwrap();
            p.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        };
        let best = loss(model.weights());
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..100 {
            let delta = Vector::from_fn(6, |_, _| rng.random_range(-1e-3..1e-3));
            assert!(loss(&(model.weights() + delta)) >= best);
        }
    }

    #[test]
    fn dirichlet_plane_is_exact_on_boundary() {
        let x = grid_2d(6);
        let y: Vec<f64> = (0..x.nrows())
            .map(|i| (-x[(i, 0)]).exp() * (x[(i, 0)] + x[(i, 1)].powi(3)))
            .collect();
        let base = RbfModel::new(
            Matrix::from_row_slice(4, 2, &[0.2, 0.2, 0.2, 0.8, 0.8, 0.2, 0.8, 0.8]),
            vec![0.6; 4],
        )
        .unwrap();
        let model = fit_lis_value(&x, &y, &base, &[plane_cube_spec(0.5)]).unwrap();
        let b = Matrix::from_fn(21, 2, |i, c| if c == 0 { 0.0 } else { i as f64 / 20.0 });
        let pred = predict_constrained(&model, &b).unwrap();
        for i in 0..21 {
            assert_eq!(pred[i], b[(i, 1)].powi(3));
        }
    }

    #[test]
    fn blended_derivative_matches_finite_differences() {
        let x = grid_2d(6);
        let y: Vec<f64> = (0..x.nrows()).map(|i| x[(i, 0)] * 0.5 + x[(i, 1)].powi(2)).collect();
        let base = RbfModel::new(
            Matrix::from_row_slice(3, 2, &[0.1, 0.3, 0.6, 0.6, 0.9, 0.2]),
            vec![0.5; 3],
        )
        .unwrap();
        let model = fit_lis_value(&x, &y, &base, &[plane_cube_spec(0.3)]).unwrap();
        let h = 1e-6;
        for &(a, b) in &[(0.2, 0.4), (0.7, 0.1), (0.45, 0.9), (-0.3, 0.5)] {
            for axis in 0..2 {
                let q = Matrix::from_row_slice(1, 2, &[a, b]);
                let analytic = predict_constrained_derivative(&model, &q, axis).unwrap()[0];
                let mut qp = q.clone();
                qp[(0, axis)] += h;
                let mut qm = q.clone();
                qm[(0, axis)] -= h;
                let fd = (predict_constrained(&model, &qp).unwrap()[0] - predict_constrained(&model, &qm).unwrap()[0])
                    / (2.0 * h);
                assert!(
                    (analytic - fd).abs() < 1e-6,
                    "axis {axis} at ({a},{b}): {analytic} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn derivative_fit_pulls_boundary_slope() {
        // Data from a flat function; the derivative constraint asks for slope 1 on x1 = 0.
        let x = grid_2d(7);
        let y = vec![0.0; x.nrows()];
        let base = RbfModel::new(
            Matrix::from_row_slice(4, 2, &[0.0, 0.25, 0.0, 0.75, 0.5, 0.5, 1.0, 0.5]),
            vec![0.5; 4],
        )
        .unwrap();
        let spec = ConstraintSpec::new(
            ConstraintSet::plane(0, 0.0).unwrap(),
            ConstraintTarget::Derivative {
                axis: 1,
                g: TargetFn::Constant(1.0),
            },
            0.2,
        )
        .unwrap();
        let model = fit_lis_derivative(&x, &y, &base, &[spec], 1).unwrap();
        let b = Matrix::from_row_slice(1, 2, &[0.0, 0.5]);
        let slope = predict_constrained_derivative(&model, &b, 1).unwrap()[0];
        assert!(slope > 0.1, "slope {slope}");
        assert!(psi(0.0, 0.2).unwrap() == 1.0);
    }
}
