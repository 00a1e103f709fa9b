//! Synthetic benchmark problems.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::constraints::{ConstraintSet, ConstraintSpec, ConstraintTarget, TargetFn};
use crate::error::{invalid, Error, Result};
use crate::numerics::Matrix;
use crate::rbf::Dataset;

pub const SINC_DOMAIN: [(f64, f64); 1] = [(-10.0, 10.0)];
pub const PDE_DOMAIN: [(f64, f64); 2] = [(0.0, 1.0), (0.0, 1.0)];
/// Evenly spaced test points on the boundary `x1 = 0`.
pub const PDE_BOUNDARY_POINTS: usize = 21;

/// What a benchmark constraint is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Value,
    /// Partial derivative along the given axis.
    Derivative(usize),
}

/// One generated benchmark instance.
#[derive(Debug, Clone)]
pub struct Problem {
    pub train: Dataset,
    pub test: Dataset,
    pub specs: Vec<ConstraintSpec>,
    /// Where constraint satisfaction is measured.
    pub check_points: Matrix,
    /// Constraint target at each check point.
    pub check_targets: Vec<f64>,
    pub check_kind: CheckKind,
    pub domain: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// `f(x1, x2) = exp(-x1) (x1 + x2^3)`.
pub fn pde_solution(x1: f64, x2: f64) -> f64 {
    (-x1).exp() * (x1 + x2.powi(3))
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn noise(sigma: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sigma).map_err(|e| invalid(format!("bad noise level {sigma}: {e}")))
}

/// Sinc regression with value constraints `f(0) = 1` and `f(pi/2) = 2/pi`.
///
/// Training inputs are evenly spaced on `[-10, 10]`, test inputs uniform
/// random. Targets carry Gaussian noise; test targets only when `noisy_test`.
pub fn gen_sinc(
    n_train: usize,
    n_test: usize,
    noise_sigma: f64,
    noisy_test: bool,
    gamma: f64,
    seed: u64,
) -> Result<Problem> {
    if n_train == 0 || n_test == 0 {
        return Err(invalid("sinc problem needs at least one training and one test point"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = noise(noise_sigma)?;
    let (lo, hi) = SINC_DOMAIN[0];
    let xs = linspace(lo, hi, n_train);
    let ys: Vec<f64> = xs.iter().map(|&x| sinc(x) + normal.sample(&mut rng)).collect();
    let train = Dataset::new(Matrix::from_column_slice(n_train, 1, &xs), ys, noise_sigma, seed)?;

    let tx: Vec<f64> = (0..n_test).map(|_| rng.random_range(lo..=hi)).collect();
    let test_sigma = if noisy_test { noise_sigma } else { 0.0 };
    let test_normal = noise(test_sigma)?;
    let ty = tx.iter().map(|&x| sinc(x) + test_normal.sample(&mut rng)).collect();
    let test = Dataset::new(Matrix::from_column_slice(n_test, 1, &tx), ty, test_sigma, seed)?;

    let constraints = [(0.0, 1.0), (FRAC_PI_2, 2.0 / PI)];
    let specs = constraints
        .iter()
        .map(|&(p, v)| {
            ConstraintSpec::new(
                ConstraintSet::points(vec![vec![p]])?,
                ConstraintTarget::Value(TargetFn::Constant(v)),
                gamma,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Problem {
        train,
        test,
        specs,
        check_points: Matrix::from_column_slice(2, 1, &[0.0, FRAC_PI_2]),
        check_targets: constraints.iter().map(|c| c.1).collect(),
        check_kind: CheckKind::Value,
        domain: SINC_DOMAIN.to_vec(),
    })
}

/// The boundary-value benchmark on `[0, 1]^2` with a constraint on `x1 = 0`:
/// `f(0, x2) = x2^3` (Dirichlet) or `df/dx2 (0, x2) = 3 x2^2` (Neumann).
///
/// `n_train` must be a perfect square (an even grid); the test set is
/// `n_test - 21` uniform random points followed by 21 even boundary points.
/// Noise is added as in [`gen_sinc`].
pub fn gen_pde(
    kind: BoundaryKind,
    n_train: usize,
    n_test: usize,
    noise_sigma: f64,
    noisy_test: bool,
    gamma: f64,
    seed: u64,
) -> Result<Problem> {
    let k = (n_train as f64).sqrt().round() as usize;
    if k < 2 || k * k != n_train {
        return Err(invalid(format!(
            "PDE training grid needs a square count of at least 4, got {n_train}"
        )));
    }
    if n_test < PDE_BOUNDARY_POINTS {
        return Err(invalid(format!(
            "PDE test set needs at least {PDE_BOUNDARY_POINTS} points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = noise(noise_sigma)?;
    let axis = linspace(0.0, 1.0, k);
    let x = Matrix::from_fn(n_train, 2, |i, c| if c == 0 { axis[i / k] } else { axis[i % k] });
    let y = (0..n_train)
        .map(|i| pde_solution(x[(i, 0)], x[(i, 1)]) + normal.sample(&mut rng))
        .collect();
    let train = Dataset::new(x, y, noise_sigma, seed)?;

    let n_random = n_test - PDE_BOUNDARY_POINTS;
    let boundary = linspace(0.0, 1.0, PDE_BOUNDARY_POINTS);
    let mut tx = Matrix::zeros(n_test, 2);
    for i in 0..n_random {
        tx[(i, 0)] = rng.random_range(0.0..=1.0);
        tx[(i, 1)] = rng.random_range(0.0..=1.0);
    }
    for (j, &b) in boundary.iter().enumerate() {
        tx[(n_random + j, 1)] = b;
    }
    let test_sigma = if noisy_test { noise_sigma } else { 0.0 };
    let test_normal = noise(test_sigma)?;
    let ty = (0..n_test)
        .map(|i| pde_solution(tx[(i, 0)], tx[(i, 1)]) + test_normal.sample(&mut rng))
        .collect();
    let test = Dataset::new(tx, ty, test_sigma, seed)?;

    let cube = TargetFn::Monomial {
        axis: 1,
        coeff: 1.0,
        power: 3,
    };
    let slope = TargetFn::Monomial {
        axis: 1,
        coeff: 3.0,
        power: 2,
    };
    let (target, check_kind, check_fn) = match kind {
        BoundaryKind::Dirichlet => (ConstraintTarget::Value(cube), CheckKind::Value, cube),
        BoundaryKind::Neumann => (
            ConstraintTarget::DerivativeIntegrated {
                axis: 1,
                g: slope,
                antiderivative: Some(cube),
            },
            CheckKind::Derivative(1),
            slope,
        ),
    };
    let specs = vec![ConstraintSpec::new(ConstraintSet::plane(0, 0.0)?, target, gamma)?];
    let check_points = Matrix::from_fn(PDE_BOUNDARY_POINTS, 2, |i, c| if c == 0 { 0.0 } else { boundary[i] });
    let check_targets = boundary.iter().map(|&b| check_fn.eval(&[0.0, b])).collect();
    Ok(Problem {
        train,
        test,
        specs,
        check_points,
        check_targets,
        check_kind,
        domain: PDE_DOMAIN.to_vec(),
    })
}

/// Samples a value constraint at `n_points` even locations so it can be fed
/// to point-constraint fitters. Point sets are returned as-is; a plane in two
/// dimensions is sampled along its free axis over `domain`, with a single
/// sample placed at the midpoint.
pub fn discretize_constraint(
    spec: &ConstraintSpec,
    n_points: usize,
    domain: &[(f64, f64)],
) -> Result<Vec<(Vec<f64>, f64)>> {
    let f = match &spec.target {
        ConstraintTarget::Value(f) => *f,
        _ => return Err(Error::Unsupported("only value constraints can be discretized".into())),
    };
    match &spec.set {
        ConstraintSet::Points(pts) => Ok(pts.iter().map(|p| (p.clone(), f.eval(p))).collect()),
        ConstraintSet::Plane { axis, level } => {
            if domain.len() != 2 {
                return Err(Error::Unsupported(
                    "plane discretization is only defined in two dimensions".into(),
                ));
            }
            if n_points == 0 {
                return Err(invalid("need at least one discretization point"));
            }
            let free = 1 - axis;
            let (lo, hi) = domain[free];
            Ok(linspace(lo, hi, n_points)
                .into_iter()
                .map(|t| {
                    let mut p = vec![0.0; 2];
                    p[*axis] = *level;
                    p[free] = t;
                    let v = f.eval(&p);
                    (p, v)
                })
                .collect())
        }
        ConstraintSet::Region(_) => Err(Error::Unsupported("region constraints cannot be discretized".into())),
    }
}
