//! Gaussian RBF networks with a leading bias unit.
//!
//! The feature row for an input `x` is `[1, phi_1(x), ..., phi_m(x)]` with
//! `phi_j(x) = exp(-|x - mu_j|^2 / sigma_j^2)`, so a model with `m` centers
//! carries `m + 1` weights and weight index 0 is the bias.

use crate::error::{invalid, Result};
use crate::numerics::{ensure_finite_matrix, ensure_finite_slice, weighted_least_squares, Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct RbfModel {
    centers: Matrix,
    widths: Vec<f64>,
    weights: Vector,
}

impl RbfModel {
    /// Builds a model with all weights zero.
    pub fn new(centers: Matrix, widths: Vec<f64>) -> Result<Self> {
        let m = centers.nrows();
        Self::with_weights(centers, widths, Vector::zeros(m + 1))
    }

    pub fn with_weights(centers: Matrix, widths: Vec<f64>, weights: Vector) -> Result<Self> {
        let (m, d) = centers.shape();
        if m == 0 || d == 0 {
            return Err(invalid("an RBF model needs at least one center of dimension >= 1"));
        }
        if widths.len() != m {
            return Err(invalid(format!("{m} centers but {} widths", widths.len())));
        }
        if let Some(s) = widths.iter().find(|&&s| !(s > 0.0) || !s.is_finite()) {
            return Err(invalid(format!("widths must be positive and finite, got {s}")));
        }
        if weights.len() != m + 1 {
            return Err(invalid(format!(
                "weight vector must have length {} (bias + {m} centers), got {}",
                m + 1,
                weights.len()
            )));
        }
        ensure_finite_matrix(&centers, "centers")?;
        ensure_finite_slice(weights.as_slice(), "weights")?;
        Ok(Self {
            centers,
            widths,
            weights,
        })
    }

    /// Number of hidden units (excluding the bias).
    pub fn n_centers(&self) -> usize {
        self.centers.nrows()
    }

    pub fn dim(&self) -> usize {
        self.centers.ncols()
    }

    pub fn centers(&self) -> &Matrix {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn weights(&self) -> &Vector {
        &self.weights
    }

    pub fn replace_weights(&self, weights: Vector) -> Result<Self> {
        Self::with_weights(self.centers.clone(), self.widths.clone(), weights)
    }

    /// True when both models have identical centers and widths.
    pub fn same_architecture(&self, other: &RbfModel) -> bool {
        self.centers == other.centers && self.widths == other.widths
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.ncols() != self.dim() {
            return Err(invalid(format!(
                "inputs have {} columns but the model expects {}",
                x.ncols(),
                self.dim()
            )));
        }
        ensure_finite_matrix(x, "inputs")
    }

    fn sq_dist(&self, x: &Matrix, i: usize, j: usize) -> f64 {
        let mut s = 0.0;
        for k in 0..self.dim() {
            let diff = x[(i, k)] - self.centers[(j, k)];
            s += diff * diff;
        }
        s
    }

    /// Design matrix `Phi(X)`, `n x (m + 1)`.
    pub fn feature_map(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let m = self.n_centers();
        let mut phi = Matrix::zeros(x.nrows(), m + 1);
        for i in 0..x.nrows() {
            phi[(i, 0)] = 1.0;
            for j in 0..m {
                let s = self.widths[j];
                phi[(i, j + 1)] = (-self.sq_dist(x, i, j) / (s * s)).exp();
            }
        }
        Ok(phi)
    }

    /// `d Phi / d x_axis`; the bias column is zero.
    pub fn feature_map_derivative(&self, x: &Matrix, axis: usize) -> Result<Matrix> {
        self.check_input(x)?;
        if axis >= self.dim() {
            return Err(invalid(format!(
                "axis {axis} out of range for dimension {}",
                self.dim()
            )));
        }
        let m = self.n_centers();
        let mut dphi = Matrix::zeros(x.nrows(), m + 1);
        for i in 0..x.nrows() {
            for j in 0..m {
                let s2 = self.widths[j] * self.widths[j];
                let phi = (-self.sq_dist(x, i, j) / s2).exp();
                dphi[(i, j + 1)] = phi * (-2.0 * (x[(i, axis)] - self.centers[(j, axis)]) / s2);
            }
        }
        Ok(dphi)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        let phi = self.feature_map(x)?;
        Ok((phi * &self.weights).as_slice().to_vec())
    }

    /// `d f / d x_axis` at each row of `x`.
    pub fn predict_derivative(&self, x: &Matrix, axis: usize) -> Result<Vec<f64>> {
        let dphi = self.feature_map_derivative(x, axis)?;
        Ok((dphi * &self.weights).as_slice().to_vec())
    }

    /// Least-squares weights `(Phi^T Phi)^+ Phi^T y` for the preset centers
    /// and widths.
    pub fn fit_unconstrained(&self, x: &Matrix, y: &[f64]) -> Result<RbfModel> {
        if x.nrows() == 0 {
            return Err(invalid("cannot fit on an empty data set"));
        }
        if y.len() != x.nrows() {
            return Err(invalid(format!("{} inputs but {} targets", x.nrows(), y.len())));
        }
        let phi = self.feature_map(x)?;
        let w = weighted_least_squares(&phi, y, &vec![1.0; y.len()])?;
        self.replace_weights(w)
    }
}

/// Inputs and targets, plus how the targets were generated.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>, noise_sigma: f64, seed: u64) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(invalid("a data set needs n >= 1 rows and d >= 1 columns"));
        }
        if y.len() != x.nrows() {
            return Err(invalid(format!("{} inputs but {} targets", x.nrows(), y.len())));
        }
        if !(noise_sigma >= 0.0) {
            return Err(invalid(format!("noise sigma must be nonnegative, got {noise_sigma}")));
        }
        ensure_finite_matrix(&x, "inputs")?;
        Ok(Self {
            x,
            y,
            noise_sigma,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// Mean squared difference.
pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    let s = crate::numerics::compensated_sum(a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)));
    s / a.len() as f64
}
