//! Center and width initialization for RBF models.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::numerics::{ensure_finite_matrix, Matrix};
use crate::rbf::RbfModel;

const KMEANS_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenterKind {
    /// Evenly spaced over the bounding box of the data.
    UniformGrid,
    /// Seeded k-means++ followed by Lloyd iterations.
    KMeans,
    /// A seeded random subset of the data rows.
    SampleSubset,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WidthRule {
    Constant(f64),
    /// `factor` times the distance to the nearest distinct center.
    NearestNeighbor(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterPolicy {
    pub kind: CenterKind,
    pub width: WidthRule,
}

impl CenterPolicy {
    pub fn new(kind: CenterKind, width: WidthRule) -> Result<Self> {
        match width {
            WidthRule::Constant(s) | WidthRule::NearestNeighbor(s) if !(s > 0.0) || !s.is_finite() => {
                Err(invalid(format!("width parameter must be positive, got {s}")))
            }
            _ => Ok(Self { kind, width }),
        }
    }
}

impl fmt::Display for CenterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CenterKind::UniformGrid => "grid",
            CenterKind::KMeans => "kmeans",
            CenterKind::SampleSubset => "subset",
        })
    }
}

impl FromStr for CenterKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "grid" | "uniform-grid" => Ok(CenterKind::UniformGrid),
            "kmeans" | "k-means" => Ok(CenterKind::KMeans),
            "subset" | "sample-subset" => Ok(CenterKind::SampleSubset),
            other => Err(Error::Config(format!("unknown center policy '{other}'"))),
        }
    }
}

impl fmt::Display for WidthRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WidthRule::Constant(s) => write!(f, "const:{s}"),
            WidthRule::NearestNeighbor(k) => write!(f, "nn:{k}"),
        }
    }
}

impl FromStr for WidthRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("width rule '{s}' must look like const:<sigma> or nn:<factor>")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad width value in '{s}'")))?;
        let rule = match kind.trim() {
            "const" | "constant" => WidthRule::Constant(value),
            "nn" | "nearest" => WidthRule::NearestNeighbor(value),
            other => return Err(Error::Config(format!("unknown width rule '{other}'"))),
        };
        CenterPolicy::new(CenterKind::KMeans, rule).map_err(|e| Error::Config(e.to_string()))?;
        Ok(rule)
    }
}

fn sq_dist(a: &Matrix, i: usize, b: &Matrix, j: usize) -> f64 {
    (0..a.ncols()).map(|k| (a[(i, k)] - b[(j, k)]).powi(2)).sum()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn uniform_grid(x: &Matrix, m: usize) -> Result<Matrix> {
    let d = x.ncols();
    let per_axis = (m as f64).powf(1.0 / d as f64).round() as usize;
    if per_axis.pow(d as u32) != m {
        return Err(invalid(format!(
            "a uniform grid in {d} dimensions needs m = k^{d} centers, got {m}"
        )));
    }
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let col = x.column(k);
            linspace(col.min(), col.max(), per_axis)
        })
        .collect();
    let mut centers = Matrix::zeros(m, d);
    for idx in 0..m {
        // Last axis varies fastest.
        let mut rem = idx;
        for k in (0..d).rev() {
            centers[(idx, k)] = axes[k][rem % per_axis];
            rem /= per_axis;
        }
    }
    Ok(centers)
}

fn kmeans(x: &Matrix, m: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = x.nrows();
    let d = x.ncols();

    // k-means++ seeding.
    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    chosen.push(rng.random_range(0..n));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(x, i, x, chosen[0])).collect();
    while chosen.len() < m {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // Only duplicates of chosen rows remain.
            let rest: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            rest[rng.random_range(0..rest.len())]
        };
        chosen.push(pick);
        for (i, near) in nearest.iter_mut().enumerate() {
            *near = near.min(sq_dist(x, i, x, pick));
        }
    }
    let mut centers = Matrix::from_fn(m, d, |j, k| x[(chosen[j], k)]);

    let mut assignment = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (i, slot) in assignment.iter_mut().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for j in 0..m {
                let dist = sq_dist(x, i, &centers, j);
                if dist < best_d {
                    best_d = dist;
                    best = j;
                }
            }
            if *slot != best {
                *slot = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Matrix::zeros(m, d);
        let mut counts = vec![0usize; m];
        for i in 0..n {
            let j = assignment[i];
            counts[j] += 1;
            for k in 0..d {
                sums[(j, k)] += x[(i, k)];
            }
        }
        for j in 0..m {
            // Empty clusters keep their previous center.
            if counts[j] > 0 {
                for k in 0..d {
                    centers[(j, k)] = sums[(j, k)] / counts[j] as f64;
                }
            }
        }
    }
    sort_rows(centers)
}

fn sort_rows(m: Matrix) -> Matrix {
    let mut rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect();
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Matrix::from_fn(m.nrows(), m.ncols(), |i, k| rows[i][k])
}

fn nearest_neighbor_widths(centers: &Matrix, factor: f64) -> Result<Vec<f64>> {
    let m = centers.nrows();
    (0..m)
        .map(|j| {
            let nn = (0..m)
                .filter(|&k| k != j)
                .map(|k| sq_dist(centers, j, centers, k).sqrt())
                .filter(|&dist| dist > 0.0)
                .fold(f64::INFINITY, f64::min);
            if nn.is_finite() {
                Ok(factor * nn)
            } else {
                Err(invalid("nearest-neighbor widths need at least two distinct centers"))
            }
        })
        .collect()
}

/// Places `m` centers and assigns widths; the returned model has zero weights.
pub fn init_centers(x: &Matrix, m: usize, policy: CenterPolicy, seed: u64) -> Result<RbfModel> {
    let n = x.nrows();
    if n == 0 || x.ncols() == 0 {
        return Err(invalid("cannot place centers on an empty data set"));
    }
    if m == 0 {
        return Err(invalid("need at least one center"));
    }
    ensure_finite_matrix(x, "inputs")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = match policy.kind {
        CenterKind::UniformGrid => uniform_grid(x, m)?,
        CenterKind::KMeans | CenterKind::SampleSubset if m > n => {
            return Err(invalid(format!("{m} centers requested from only {n} samples")));
        }
        CenterKind::KMeans => kmeans(x, m, &mut rng),
        CenterKind::SampleSubset => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let mut picked = idx[..m].to_vec();
            picked.sort_unstable();
            Matrix::from_fn(m, x.ncols(), |j, k| x[(picked[j], k)])
        }
    };
    let widths = match policy.width {
        WidthRule::Constant(s) => vec![s; m],
        WidthRule::NearestNeighbor(factor) => nearest_neighbor_widths(&centers, factor)?,
    };
    RbfModel::new(centers, widths)
}
