//! Dense linear algebra used by every fitter.
//!
//! All solves go through an SVD-based pseudo-inverse with a relative singular
//! value cutoff, so rank-deficient Gram matrices (duplicate centers, a bias
//! column that is nearly spanned by wide kernels, derivative features whose
//! bias column is identically zero) yield minimum-norm solutions instead of
//! failures.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Singular values below `relative_cutoff * sigma_max` are treated as zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdTolerance {
    relative_cutoff: f64,
}

impl SvdTolerance {
    pub const DEFAULT_CUTOFF: f64 = 1e-12;

    pub fn new(relative_cutoff: f64) -> Result<Self> {
        if !(relative_cutoff > 0.0) || !relative_cutoff.is_finite() {
            return Err(invalid(format!(
                "relative cutoff must be positive and finite, got {relative_cutoff}"
            )));
        }
        Ok(Self { relative_cutoff })
    }

    pub fn relative_cutoff(&self) -> f64 {
        self.relative_cutoff
    }
}

impl Default for SvdTolerance {
    fn default() -> Self {
        Self {
            relative_cutoff: Self::DEFAULT_CUTOFF,
        }
    }
}

pub(crate) fn ensure_finite_matrix(a: &Matrix, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{what} contains non-finite entries")))
    }
}

pub(crate) fn ensure_finite_slice(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{what} contains non-finite entries")))
    }
}

/// Pseudo-inverse together with the numerical rank it was computed at.
struct PinvRank {
    pinv: Matrix,
    rank: usize,
}

fn pinv_with_rank(a: &Matrix, tol: SvdTolerance) -> PinvRank {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return PinvRank {
            pinv: Matrix::zeros(cols, rows),
            rank: 0,
        };
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("U requested");
    let v_t = svd.v_t.as_ref().expect("V^T requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = tol.relative_cutoff * sigma_max;

    let mut pinv = Matrix::zeros(cols, rows);
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        rank += 1;
        let inv = 1.0 / s;
        // pinv += v_k * inv * u_k^T
        let vk = v_t.row(k).transpose();
        let uk = u.column(k);
        pinv.ger(inv, &vk, &uk, 1.0);
    }
    PinvRank { pinv, rank }
}

/// Moore-Penrose pseudo-inverse via SVD.
pub fn pseudo_inverse(a: &Matrix, tol: SvdTolerance) -> Result<Matrix> {
    ensure_finite_matrix(a, "matrix")?;
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(invalid("matrix must have at least one row and column"));
    }
    Ok(pinv_with_rank(a, tol).pinv)
}

/// Numerical rank under the same cutoff rule as [`pseudo_inverse`].
pub fn numerical_rank(a: &Matrix, tol: SvdTolerance) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.singular_values();
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    let cutoff = tol.relative_cutoff * sigma_max;
    sv.iter().filter(|&&s| s > cutoff && s > 0.0).count()
}

/// `diag(weights) * m`, the row-broadcast Hadamard product.
pub fn scale_rows(m: &Matrix, weights: &[f64]) -> Matrix {
    assert_eq!(m.nrows(), weights.len());
    let mut out = m.clone();
    for (i, &w) in weights.iter().enumerate() {
        out.row_mut(i).scale_mut(w);
    }
    out
}

/// Minimizes `sum_i w_i (rhs_i - (design W)_i)^2` through the pseudo-inverse
/// of the weighted Gram matrix. Rank deficiency yields the minimum-norm
/// minimizer.
pub fn weighted_least_squares(design: &Matrix, rhs: &[f64], row_weights: &[f64]) -> Result<Vector> {
    weighted_least_squares_with(design, rhs, row_weights, SvdTolerance::default())
}

pub fn weighted_least_squares_with(
    design: &Matrix,
    rhs: &[f64],
    row_weights: &[f64],
    tol: SvdTolerance,
) -> Result<Vector> {
    let n = design.nrows();
    if n == 0 || design.ncols() == 0 {
        return Err(invalid("design matrix must be non-empty"));
    }
    if rhs.len() != n || row_weights.len() != n {
        return Err(invalid(format!(
            "design has {n} rows but rhs has {} entries and weights {}",
            rhs.len(),
            row_weights.len()
        )));
    }
    ensure_finite_matrix(design, "design")?;
    ensure_finite_slice(rhs, "rhs")?;
    ensure_finite_slice(row_weights, "row weights")?;
    if let Some(w) = row_weights.iter().find(|&&w| w < 0.0) {
        return Err(invalid(format!("row weights must be nonnegative, got {w}")));
    }

    let weighted = scale_rows(design, row_weights);
    let gram = design.tr_mul(&weighted);
    let y = Vector::from_column_slice(rhs);
    let moment = weighted.tr_mul(&y);
    Ok(solve_symmetric_pinv(&gram, &moment, tol))
}

/// `G^+ b` followed by one residual-correction pass.
fn solve_symmetric_pinv(gram: &Matrix, rhs: &Vector, tol: SvdTolerance) -> Vector {
    let pinv = pinv_with_rank(gram, tol).pinv;
    let mut x = &pinv * rhs;
    let residual = rhs - gram * &x;
    x += &pinv * residual;
    x
}

/// Stationary point of `1/2 W^T G W - rhs^T W` subject to `A W = b`.
#[derive(Debug, Clone)]
pub struct KktSolution {
    pub weights: Vector,
    /// One multiplier per constraint row, sign convention
    /// `G W - rhs + A^T lambda = 0`.
    pub multipliers: Vector,
    /// Set when the saddle system is singular: dependent constraint rows or
    /// a Gram matrix that is singular on the constraint null space.
    pub rank_deficient: bool,
    /// `max_i |(A W - b)_i| / max(1, max_i |b_i|)`.
    pub constraint_residual: f64,
}

/// Solves the equality-constrained quadratic program.
///
/// The saddle system `[G A^T; A 0] [W; lambda] = [rhs; b]` is solved by the
/// null-space method: a minimum-norm particular solution `A^+ b` plus a
/// correction restricted to `null(A)`, so the constraint rows hold to working
/// precision even when `G` is badly conditioned. Whenever the saddle matrix is
/// nonsingular this is its unique solution; otherwise the pseudo-inverse picks
/// the minimum-norm stationary point and `rank_deficient` is set.
pub fn solve_kkt(gram: &Matrix, rhs: &[f64], constraint_rows: &Matrix, constraint_rhs: &[f64]) -> Result<KktSolution> {
    solve_kkt_with(gram, rhs, constraint_rows, constraint_rhs, SvdTolerance::default())
}

pub fn solve_kkt_with(
    gram: &Matrix,
    rhs: &[f64],
    constraint_rows: &Matrix,
    constraint_rhs: &[f64],
    tol: SvdTolerance,
) -> Result<KktSolution> {
    let n = gram.nrows();
    if n == 0 || gram.ncols() != n {
        return Err(invalid(format!(
            "gram must be square and non-empty, got {:?}",
            gram.shape()
        )));
    }
    if rhs.len() != n {
        return Err(invalid(format!("rhs has {} entries, expected {n}", rhs.len())));
    }
    let p = constraint_rows.nrows();
    if p > 0 && constraint_rows.ncols() != n {
        return Err(invalid(format!(
            "constraint rows have {} columns, expected {n}",
            constraint_rows.ncols()
        )));
    }
    if constraint_rhs.len() != p {
        return Err(invalid(format!(
            "{p} constraint rows but {} right-hand sides",
            constraint_rhs.len()
        )));
    }
    ensure_finite_matrix(gram, "gram")?;
    ensure_finite_slice(rhs, "rhs")?;
    ensure_finite_matrix(constraint_rows, "constraint rows")?;
    ensure_finite_slice(constraint_rhs, "constraint rhs")?;
    let scale = gram.amax().max(f64::MIN_POSITIVE);
    if (gram - gram.transpose()).amax() > 1e-8 * scale {
        return Err(invalid("gram matrix is not symmetric"));
    }

    let rhs = Vector::from_column_slice(rhs);
    let b = Vector::from_column_slice(constraint_rhs);

    if p == 0 {
        let pr = pinv_with_rank(gram, tol);
        let mut w = &pr.pinv * &rhs;
        let r = &rhs - gram * &w;
        w += &pr.pinv * r;
        return Ok(KktSolution {
            weights: w,
            multipliers: Vector::zeros(0),
            rank_deficient: pr.rank < n,
            constraint_residual: 0.0,
        });
    }

    // Row space of A from its SVD; its complement is null(A).
    let svd = constraint_rows.clone().svd(true, true);
    let u = svd.u.as_ref().expect("U requested");
    let v_t = svd.v_t.as_ref().expect("V^T requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = tol.relative_cutoff * sigma_max;
    let kept: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > cutoff && s > 0.0)
        .map(|(k, _)| k)
        .collect();
    let rank_a = kept.len();

    let mut a_pinv = Matrix::zeros(n, p);
    let mut row_proj = Matrix::zeros(n, n);
    for &k in &kept {
        let vk = v_t.row(k).transpose();
        let uk = u.column(k);
        a_pinv.ger(1.0 / svd.singular_values[k], &vk, &uk, 1.0);
        row_proj.ger(1.0, &vk, &vk, 1.0);
    }
    let null_proj = Matrix::identity(n, n) - row_proj;

    let w_part = &a_pinv * &b;
    let reduced = &null_proj * gram * &null_proj;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let reduced_rhs = &null_proj * (&rhs - gram * &w_part);
    let pr = pinv_with_rank(&reduced, tol);
    let mut z = &pr.pinv * &reduced_rhs;
    let r = &reduced_rhs - &reduced * &z;
    z += &pr.pinv * r;
    let weights = &w_part + &null_proj * z;

    let stationarity = &rhs - gram * &weights;
    let multipliers = a_pinv.tr_mul(&stationarity);

    let resid = constraint_rows * &weights - &b;
    let constraint_residual = resid.amax() / b.amax().max(1.0);
    if !weights.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("KKT solve produced non-finite weights".into()));
    }

    let null_dim = n - rank_a;
    Ok(KktSolution {
        weights,
        multipliers,
        rank_deficient: rank_a < p || pr.rank < null_dim,
        constraint_residual,
    })
}

/// Neumaier-compensated sum, used wherever aggregation order must not leak
/// into results.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn penrose_defect(a: &Matrix, p: &Matrix) -> f64 {
        let scale = a.amax().max(1.0);
        let pscale = p.amax().max(1.0);
        let d1 = (a * p * a - a).amax() / scale;
        let d2 = (p * a * p - p).amax() / pscale;
        let ap = a * p;
        let pa = p * a;
        let d3 = (&ap - ap.transpose()).amax();
        let d4 = (&pa - pa.transpose()).amax();
        d1.max(d2).max(d3).max(d4)
    }

    #[test]
    fn pinv_of_identity() {
        let i3 = Matrix::identity(3, 3);
        let p = pseudo_inverse(&i3, SvdTolerance::default()).unwrap();
        assert!((p - i3).amax() < 1e-15);
    }

    #[test]
    fn pinv_rank_deficient_diag() {
        let a = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let p = pseudo_inverse(&a, SvdTolerance::default()).unwrap();
        let expected = Matrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]);
        assert!((p - expected).amax() < 1e-15);
    }

    #[test]
    fn pinv_penrose_on_random_tall() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(&mut rng, 4, 2);
        let p = pseudo_inverse(&a, SvdTolerance::default()).unwrap();
        assert_eq!(p.shape(), (2, 4));
        assert!(penrose_defect(&a, &p) < 1e-8);
    }

    #[test]
    fn pinv_penrose_up_to_20() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let r = rng.random_range(1..=20);
            let c = rng.random_range(1..=20);
            let mut a = random_matrix(&mut rng, r, c);
            // Inject a dependent column now and then.
            if c > 2 && rng.random_bool(0.3) {
                let col = a.column(0) * 2.0 - a.column(1);
                a.set_column(c - 1, &col);
            }
            let p = pseudo_inverse(&a, SvdTolerance::default()).unwrap();
            assert!(penrose_defect(&a, &p) < 1e-8, "{r}x{c}");
        }
    }

    #[test]
    fn pinv_rejects_non_finite() {
        let a = Matrix::from_row_slice(1, 2, &[1.0, f64::NAN]);
        assert!(matches!(
            pseudo_inverse(&a, SvdTolerance::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn tolerance_must_be_positive() {
        assert!(SvdTolerance::new(0.0).is_err());
        assert!(SvdTolerance::new(-1.0).is_err());
        assert!(SvdTolerance::new(1e-10).is_ok());
    }

    #[test]
    fn wls_identity_design() {
        let d = Matrix::identity(2, 2);
        let w = weighted_least_squares(&d, &[3.0, 5.0], &[1.0, 1.0]).unwrap();
        assert!((w[0] - 3.0).abs() < 1e-14 && (w[1] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn wls_zero_weight_row_ignored() {
        let d = Matrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let w = weighted_least_squares(&d, &[0.0, 2.0], &[1.0, 0.0]).unwrap();
        assert!(w[0].abs() < 1e-15);
    }

    #[test]
    fn wls_errors() {
        let d = Matrix::identity(2, 2);
        assert!(weighted_least_squares(&d, &[1.0], &[1.0, 1.0]).is_err());
        assert!(weighted_least_squares(&d, &[1.0, 1.0], &[1.0, -0.5]).is_err());
    }

    /// Exact coordinate minimization on the scalar weighted objective; each
    /// coordinate step solves a 1-d quadratic by sampling it at three points.
    fn coordinate_descent_oracle(d: &Matrix, y: &[f64], w: &[f64]) -> Vec<f64> {
        let obj = |x: &[f64]| -> f64 {
            let mut s = 0.0;
            for i in 0..d.nrows() {
                let mut f = 0.0;
                for j in 0..d.ncols() {
                    f += d[(i, j)] * x[j];
                }
                s += w[i] * (y[i] - f) * (y[i] - f);
            }
            s
        };
        let mut x = vec![0.0; d.ncols()];
        for _ in 0..20000 {
            let mut moved = 0.0f64;
            for j in 0..x.len() {
                let x0 = x[j];
                let f0 = obj(&x);
                x[j] = x0 + 1.0;
                let fp = obj(&x);
                x[j] = x0 - 1.0;
                let fm = obj(&x);
                let curv = fp - 2.0 * f0 + fm;
                let step = -(fp - fm) / (2.0 * curv);
                x[j] = x0 + step;
                moved = moved.max(step.abs());
            }
            if moved < 1e-13 {
                break;
            }
        }
        x
    }

    #[test]
    fn wls_matches_iterative_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = random_matrix(&mut rng, 5, 2);
        let y: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let w: Vec<f64> = (0..5).map(|_| rng.random_range(0.1..2.0)).collect();
        let got = weighted_least_squares(&d, &y, &w).unwrap();
        let want = coordinate_descent_oracle(&d, &y, &w);
        for j in 0..2 {
            assert!((got[j] - want[j]).abs() < 1e-6, "{} vs {}", got[j], want[j]);
        }
    }

    #[test]
    fn wls_unit_weights_equal_plain_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = random_matrix(&mut rng, 9, 4);
        let y: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = weighted_least_squares(&d, &y, &[1.0; 9]).unwrap();
        let gram = d.tr_mul(&d);
        let plain = pseudo_inverse(&gram, SvdTolerance::default()).unwrap() * d.tr_mul(&Vector::from_column_slice(&y));
        assert!((got - plain).amax() < 1e-10);
    }

    #[test]
    fn kkt_projection_onto_constraint() {
        let g = Matrix::identity(2, 2);
        let a = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let sol = solve_kkt(&g, &[0.0, 0.0], &a, &[1.0]).unwrap();
        assert!((sol.weights[0] - 1.0).abs() < 1e-14);
        assert!(sol.weights[1].abs() < 1e-14);
        // G W - rhs + A^T lambda = 0  =>  lambda = -1
        assert!((sol.multipliers[0] + 1.0).abs() < 1e-14);
        assert!(!sol.rank_deficient);
    }

    /// Augmented Lagrangian with fixed `rho`: alternate an LU solve of the
    /// penalized stationarity condition with a multiplier update.
    fn augmented_lagrangian_oracle(g: &Matrix, rhs: &Vector, a: &Matrix, b: &Vector) -> (Vector, Vector) {
        let rho = 100.0;
        let h = g + a.tr_mul(a) * rho;
        let lu = h.lu();
        let mut lambda = Vector::zeros(a.nrows());
        let mut w = Vector::zeros(g.nrows());
        for _ in 0..500 {
            let r = rhs - a.tr_mul(&lambda) + a.tr_mul(b) * rho;
            w = lu.solve(&r).expect("penalized Hessian is nonsingular");
            lambda += (a * &w - b) * rho;
        }
        (w, lambda)
    }

    #[test]
    fn kkt_matches_augmented_lagrangian_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..3 {
            let phi = random_matrix(&mut rng, 8, 3);
            let g = phi.tr_mul(&phi);
            let y = Vector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
            let rhs = phi.tr_mul(&y);
            let a = random_matrix(&mut rng, 1, 3);
            let b = Vector::from_element(1, rng.random_range(-1.0..1.0));
            let sol = solve_kkt(&g, rhs.as_slice(), &a, b.as_slice()).unwrap();
            let (oracle, lambda) = augmented_lagrangian_oracle(&g, &rhs, &a, &b);
            assert!((&sol.weights - &oracle).amax() < 1e-5, "{} vs {}", sol.weights, oracle);
            assert!((&sol.multipliers - &lambda).amax() < 1e-5);
            assert!(sol.constraint_residual < 1e-10);
        }
    }

    #[test]
    fn kkt_is_feasible_and_optimal_against_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let phi = random_matrix(&mut rng, 12, 5);
        let g = phi.tr_mul(&phi);
        let y = Vector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
        let rhs = phi.tr_mul(&y);
        let a = random_matrix(&mut rng, 2, 5);
        let b = Vector::from_vec(vec![0.3, -0.7]);
        let sol = solve_kkt(&g, rhs.as_slice(), &a, b.as_slice()).unwrap();
        assert!(sol.constraint_residual < 1e-10);
        let objective = |w: &Vector| 0.5 * w.dot(&(&g * w)) - rhs.dot(w);
        let best = objective(&sol.weights);

        // Feasible perturbations live in null(A).
        let pa = pseudo_inverse(&a, SvdTolerance::default()).unwrap();
        let null_proj = Matrix::identity(5, 5) - &pa * &a;
        for _ in 0..100 {
            let delta = &null_proj * Vector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
            let trial = &sol.weights + delta;
            assert!(objective(&trial) >= best - 1e-12);
        }
    }

    #[test]
    fn kkt_flags_dependent_constraints() {
        let g = Matrix::identity(3, 3);
        let a = Matrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let sol = solve_kkt(&g, &[0.0; 3], &a, &[1.0, 2.0]).unwrap();
        assert!(sol.rank_deficient);
        assert!(sol.constraint_residual < 1e-12);
        assert!((sol.weights[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kkt_without_constraints_is_plain_solve() {
        let g = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let sol = solve_kkt(&g, &[2.0, 2.0], &Matrix::zeros(0, 2), &[]).unwrap();
        assert!((sol.weights[0] - 1.0).abs() < 1e-14);
        assert!((sol.weights[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn kkt_rejects_shape_mismatch() {
        let g = Matrix::identity(2, 2);
        let a = Matrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        assert!(solve_kkt(&g, &[0.0, 0.0], &a, &[1.0]).is_err());
        let a = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!(solve_kkt(&g, &[0.0, 0.0], &a, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16];
        assert_eq!(compensated_sum(v), 1.0);
    }
}
