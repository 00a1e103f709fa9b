//! Experiment harness: synthetic problems, repeated seeded trials and
//! error statistics.

mod config;
mod data;
mod report;

pub use config::{Experiment, ExperimentConfig, Method};
pub use data::{
    discretize_constraint, gen_pde, gen_sinc, pde_solution, sinc, BoundaryKind, CheckKind, Problem,
    PDE_BOUNDARY_POINTS, PDE_DOMAIN, SINC_DOMAIN,
};
pub use report::{write_report_csv, write_trace_svg, Trace};

use rayon::prelude::*;

use crate::analysis::{
    coupling_decompose, generic_modification, locality_ratio, weight_changes, CouplingReport, WeightChangeReport,
};
use crate::centers::{init_centers, CenterPolicy, WidthRule};
use crate::error::{Error, Result};
use crate::gcnn::{
    fit_gis_lagrange, fit_lis_derivative, fit_lis_integrated, fit_lis_value, fit_unconstrained, predict_constrained,
    predict_constrained_derivative, GcnnModel,
};
use crate::numerics::{compensated_sum, Matrix};
use crate::rbf::{mse, RbfModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResult {
    pub mse_cstr: f64,
    pub mse_test: f64,
    pub mse_train: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialResult>,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().cloned()) / n;
    let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / n;
    (mean, var.sqrt())
}

impl ExperimentReport {
    pub fn mse_cstr(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.mse_cstr).collect()
    }

    pub fn mse_test(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.mse_test).collect()
    }

    pub fn cstr_stats(&self) -> (f64, f64) {
        mean_std(&self.mse_cstr())
    }

    pub fn test_stats(&self) -> (f64, f64) {
        mean_std(&self.mse_test())
    }
}

/// Generates the problem instance for one seed.
pub fn make_problem(config: &ExperimentConfig, seed: u64) -> Result<Problem> {
    let c = config;
    match c.experiment {
        Experiment::Sinc => gen_sinc(c.n_train, c.n_test, c.noise_sigma, c.test_noise, c.gamma, seed),
        Experiment::PdeDirichlet => gen_pde(
            BoundaryKind::Dirichlet,
            c.n_train,
            c.n_test,
            c.noise_sigma,
            c.test_noise,
            c.gamma,
            seed,
        ),
        Experiment::PdeNeumann | Experiment::PdeNeumannIntegrated => gen_pde(
            BoundaryKind::Neumann,
            c.n_train,
            c.n_test,
            c.noise_sigma,
            c.test_noise,
            c.gamma,
            seed,
        ),
    }
}

/// Checks that the configured method can handle the experiment's constraints.
pub fn check_method(config: &ExperimentConfig, method: Method) -> Result<()> {
    let neumann = config.experiment.is_neumann();
    match method {
        Method::GcnnEcI if !neumann => Err(Error::Config(format!(
            "gcnn-ec-i needs derivative constraints, experiment {} has value constraints",
            config.experiment
        ))),
        Method::GisLagrange if neumann => Err(Error::Config(
            "gis-lagrange supports only value constraints; the Neumann boundary has none".into(),
        )),
        Method::GisLagrange if config.experiment != Experiment::Sinc && config.gis_points == 0 => Err(Error::Config(
            "gis-lagrange on a continuous boundary needs gis_points > 0 to discretize it".into(),
        )),
        _ => Ok(()),
    }
}

/// Fits `method` on `problem` with the network `base`.
pub fn fit_method(config: &ExperimentConfig, method: Method, problem: &Problem, base: &RbfModel) -> Result<GcnnModel> {
    check_method(config, method)?;
    let (x, y) = (&problem.train.x, &problem.train.y[..]);
    let integrated = method == Method::GcnnEcI
        || (method == Method::GcnnEc && config.experiment == Experiment::PdeNeumannIntegrated);
    match method {
        Method::Rbfnn => fit_unconstrained(x, y, base),
        Method::GisLagrange => {
            let mut points = Vec::new();
            for spec in &problem.specs {
                points.extend(discretize_constraint(spec, config.gis_points, &problem.domain)?);
            }
            fit_gis_lagrange(x, y, base, &points)
        }
        _ if integrated => fit_lis_integrated(x, y, base, &problem.specs),
        _ => match problem.check_kind {
            CheckKind::Value => fit_lis_value(x, y, base, &problem.specs),
            CheckKind::Derivative(axis) => fit_lis_derivative(x, y, base, &problem.specs, axis),
        },
    }
}

/// Problem and fitted model of trial `trial`, with the centers placed under
/// `centers`.
pub fn fit_trial_with(
    config: &ExperimentConfig,
    method: Method,
    centers: CenterPolicy,
    trial: usize,
) -> Result<(Problem, GcnnModel)> {
    let seed = config.trial_seed(trial);
    let problem = make_problem(config, seed)?;
    let base = init_centers(&problem.train.x, config.n_rbf, centers, seed)?;
    let model = fit_method(config, method, &problem, &base)?;
    Ok((problem, model))
}

pub fn fit_trial(config: &ExperimentConfig, trial: usize) -> Result<(Problem, GcnnModel)> {
    fit_trial_with(config, config.method, config.centers, trial)
}

/// Squared constraint residual averaged over the problem's check points.
pub fn constraint_mse(problem: &Problem, model: &GcnnModel) -> Result<f64> {
    let got = match problem.check_kind {
        CheckKind::Value => predict_constrained(model, &problem.check_points)?,
        CheckKind::Derivative(axis) => predict_constrained_derivative(model, &problem.check_points, axis)?,
    };
    Ok(mse(&got, &problem.check_targets))
}

fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<TrialResult> {
    let (problem, model) = fit_trial(config, trial)?;
    let result = TrialResult {
        mse_cstr: constraint_mse(&problem, &model)?,
        mse_test: mse(&predict_constrained(&model, &problem.test.x)?, &problem.test.y),
        mse_train: mse(&predict_constrained(&model, &problem.train.x)?, &problem.train.y),
    };
    if [result.mse_cstr, result.mse_test, result.mse_train]
        .iter()
        .any(|v| !v.is_finite())
    {
        return Err(Error::Numerical(format!("trial {trial} produced a non-finite error")));
    }
    Ok(result)
}

/// Runs every trial of `config`. With `parallel` set, trials run on that many
/// threads; results are identical either way.
pub fn run_experiment(config: &ExperimentConfig, parallel: Option<usize>) -> Result<ExperimentReport> {
    config.validate()?;
    check_method(config, config.method)?;
    let results: Vec<Result<TrialResult>> = match parallel {
        Some(threads) if threads > 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
            pool.install(|| {
                (0..config.trials)
                    .into_par_iter()
                    .map(|t| run_trial(config, t))
                    .collect()
            })
        }
        _ => (0..config.trials).map(|t| run_trial(config, t)).collect(),
    };
    Ok(ExperimentReport {
        config: config.clone(),
        trials: results.into_iter().collect::<Result<_>>()?,
    })
}

/// Truth and prediction of trial 0 along a line: the whole domain for the
/// one-dimensional problem, the boundary `x1 = 0` otherwise.
pub fn boundary_trace(config: &ExperimentConfig) -> Result<Trace> {
    let (problem, model) = fit_trial(config, 0)?;
    let n = 201;
    let (label, (lo, hi)) = match config.experiment {
        Experiment::Sinc => ("x", SINC_DOMAIN[0]),
        _ => ("x2 on x1 = 0", PDE_DOMAIN[1]),
    };
    let ts = data::linspace(lo, hi, n);
    let (points, truth, ylabel) = match config.experiment {
        Experiment::Sinc => (
            Matrix::from_column_slice(n, 1, &ts),
            ts.iter().map(|&t| sinc(t)).collect::<Vec<_>>(),
            "f",
        ),
        Experiment::PdeDirichlet => (
            Matrix::from_fn(n, 2, |i, c| if c == 0 { 0.0 } else { ts[i] }),
            ts.iter().map(|t| t.powi(3)).collect(),
            "f",
        ),
        _ => (
            Matrix::from_fn(n, 2, |i, c| if c == 0 { 0.0 } else { ts[i] }),
            ts.iter().map(|t| 3.0 * t * t).collect(),
            "df/dx2",
        ),
    };
    let predicted = match problem.check_kind {
        CheckKind::Derivative(axis) => predict_constrained_derivative(&model, &points, axis)?,
        CheckKind::Value => predict_constrained(&model, &points)?,
    };
    Ok(Trace {
        title: format!("{} / {}", config.experiment, config.method),
        x_label: label.into(),
        y_label: ylabel.into(),
        xs: ts,
        truth,
        predicted,
    })
}

/// Evenly spaced grid over the problem domain, last axis fastest.
pub fn domain_grid(domain: &[(f64, f64)], per_axis: usize) -> Matrix {
    let axes: Vec<Vec<f64>> = domain
        .iter()
        .map(|&(lo, hi)| data::linspace(lo, hi, per_axis))
        .collect();
    let d = domain.len();
    let n = per_axis.pow(d as u32);
    Matrix::from_fn(n, d, |i, k| {
        let mut rem = i;
        for _ in (k + 1)..d {
            rem /= per_axis;
        }
        axes[k][rem % per_axis]
    })
}

fn width_sweep(config: &ExperimentConfig) -> Result<Vec<(f64, CenterPolicy)>> {
    if config.sigmas.is_empty() {
        let label = match config.centers.width {
            WidthRule::Constant(s) | WidthRule::NearestNeighbor(s) => s,
        };
        return Ok(vec![(label, config.centers)]);
    }
    if !matches!(config.centers.width, WidthRule::Constant(_)) {
        return Err(Error::Config("sigmas can only sweep a constant width rule".into()));
    }
    config
        .sigmas
        .iter()
        .map(|&s| Ok((s, CenterPolicy::new(config.centers.kind, WidthRule::Constant(s))?)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct WeightStudy {
    pub sigma: f64,
    pub method: Method,
    pub report: WeightChangeReport,
}

/// Weight changes of each analyzed method against the unconstrained network
/// with the same centers, for every width in the sweep (trial 0 data).
pub fn run_weight_study(config: &ExperimentConfig) -> Result<Vec<WeightStudy>> {
    let mut out = Vec::new();
    for (sigma, policy) in width_sweep(config)? {
        let (problem, reference) = fit_trial_with(config, Method::Rbfnn, policy, 0)?;
        for &method in &config.analyze_methods {
            let model = fit_method(config, method, &problem, reference.base())?;
            out.push(WeightStudy {
                sigma,
                method,
                report: weight_changes(&model, reference.base())?,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CouplingStudy {
    pub sigma: f64,
    pub method: Method,
    pub grid: Matrix,
    /// Present for schemes with an explicit coupling form.
    pub coupling: Option<CouplingReport>,
    pub fm: Vec<f64>,
    pub locality: Option<f64>,
}

/// Coupling terms and generic modification of each analyzed method on a grid
/// over the domain (trial 0 data).
pub fn run_coupling_study(config: &ExperimentConfig) -> Result<Vec<CouplingStudy>> {
    let mut out = Vec::new();
    for (sigma, policy) in width_sweep(config)? {
        let (problem, reference) = fit_trial_with(config, Method::Rbfnn, policy, 0)?;
        let grid = domain_grid(&problem.domain, config.grid_points);
        for &method in &config.analyze_methods {
            let model = fit_method(config, method, &problem, reference.base())?;
            let coupling = match coupling_decompose(&model, &grid, Some(reference.base())) {
                Ok(r) => Some(r),
                Err(Error::Unsupported(_)) => None,
                Err(e) => return Err(e),
            };
            let fm = generic_modification(&model, reference.base(), &grid)?;
            let locality = locality_ratio(&problem.specs, &grid, &fm)?;
            out.push(CouplingStudy {
                sigma,
                method,
                grid: grid.clone(),
                coupling,
                fm,
                locality,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_std() {
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }

    #[test]
    fn grid_ordering() {
        let g = domain_grid(&[(0.0, 1.0), (0.0, 2.0)], 3);
        assert_eq!(g.nrows(), 9);
        assert_eq!(g.row(1).iter().cloned().collect::<Vec<_>>(), vec![0.0, 1.0]);
        assert_eq!(g.row(3).iter().cloned().collect::<Vec<_>>(), vec![0.5, 0.0]);
    }

    #[test]
    fn method_mismatches_are_config_errors() {
        let mut cfg = ExperimentConfig::defaults(Experiment::PdeNeumann);
        cfg.method = Method::GisLagrange;
        assert!(matches!(run_experiment(&cfg, None), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::defaults(Experiment::PdeDirichlet);
        cfg.method = Method::GisLagrange;
        cfg.gis_points = 0;
        assert!(matches!(run_experiment(&cfg, None), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::defaults(Experiment::Sinc);
        cfg.method = Method::GcnnEcI;
        assert!(matches!(run_experiment(&cfg, None), Err(Error::Config(_))));
    }

    #[test]
    fn interpolation_regime_fits_training_data() {
        let mut cfg = ExperimentConfig::defaults(Experiment::PdeDirichlet);
        cfg.method = Method::Rbfnn;
        cfg.n_train = 16;
        cfg.n_rbf = 16;
        cfg.noise_sigma = 0.0;
        cfg.trials = 1;
        cfg.centers = CenterPolicy::new(crate::centers::CenterKind::SampleSubset, WidthRule::Constant(0.4)).unwrap();
        let report = run_experiment(&cfg, None).unwrap();
        assert!(report.trials[0].mse_train <= 1e-12, "{}", report.trials[0].mse_train);
        assert_eq!(report.test_stats().1, 0.0);
    }

    #[test]
    fn parallel_matches_serial() {
        let mut cfg = ExperimentConfig::defaults(Experiment::Sinc);
        cfg.trials = 8;
        let a = run_experiment(&cfg, None).unwrap();
        let b = run_experiment(&cfg, Some(4)).unwrap();
        assert_eq!(a, b);
    }
}
