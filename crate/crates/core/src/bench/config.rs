//! Flat `key = value` experiment configuration.

use std::fmt;
use std::str::FromStr;

use crate::centers::{CenterKind, CenterPolicy, WidthRule};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Sinc,
    PdeDirichlet,
    PdeNeumann,
    /// Neumann data where `gcnn-ec` means the integrated fitter.
    PdeNeumannIntegrated,
}

impl Experiment {
    pub fn is_neumann(&self) -> bool {
        matches!(self, Experiment::PdeNeumann | Experiment::PdeNeumannIntegrated)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Plain RBF network, constraints ignored.
    Rbfnn,
    GisLagrange,
    GcnnEc,
    GcnnEcI,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::Sinc => "sinc",
            Experiment::PdeDirichlet => "pde-dirichlet",
            Experiment::PdeNeumann => "pde-neumann",
            Experiment::PdeNeumannIntegrated => "pde-neumann-integrated",
        })
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sinc" => Ok(Experiment::Sinc),
            "pde-dirichlet" => Ok(Experiment::PdeDirichlet),
            "pde-neumann" => Ok(Experiment::PdeNeumann),
            "pde-neumann-integrated" => Ok(Experiment::PdeNeumannIntegrated),
            other => Err(config_err(format!("unknown experiment '{other}'"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Rbfnn => "rbfnn",
            Method::GisLagrange => "gis-lagrange",
            Method::GcnnEc => "gcnn-ec",
            Method::GcnnEcI => "gcnn-ec-i",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rbfnn" | "unconstrained" => Ok(Method::Rbfnn),
            "gis-lagrange" | "gis" => Ok(Method::GisLagrange),
            "gcnn-ec" => Ok(Method::GcnnEc),
            "gcnn-ec-i" => Ok(Method::GcnnEcI),
            other => Err(config_err(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub method: Method,
    pub n_train: usize,
    pub n_test: usize,
    pub n_rbf: usize,
    pub gamma: f64,
    pub noise_sigma: f64,
    /// Whether test targets carry the same noise as training targets.
    pub test_noise: bool,
    pub trials: usize,
    pub seed: u64,
    pub centers: CenterPolicy,
    /// Points used to discretize continuous constraints for the Lagrange
    /// baseline; 0 leaves them continuous.
    pub gis_points: usize,
    /// Width sweep for the analysis studies; empty means the configured width.
    pub sigmas: Vec<f64>,
    /// Methods compared by the analysis studies.
    pub analyze_methods: Vec<Method>,
    /// Evaluation grid resolution per input axis for the analysis studies.
    pub grid_points: usize,
}

/// Widths that bring each benchmark into the range of the published errors.
const SINC_WIDTH: f64 = 2.0;
const PDE_WIDTH: f64 = 0.5;

impl ExperimentConfig {
    /// Defaults for `experiment`, matching the published experiment setup.
    pub fn defaults(experiment: Experiment) -> Self {
        let centers = |w| CenterPolicy {
            kind: CenterKind::KMeans,
            width: WidthRule::Constant(w),
        };
        match experiment {
            Experiment::Sinc => Self {
                experiment,
                method: Method::GcnnEc,
                n_train: 30,
                n_test: 500,
                n_rbf: 11,
                gamma: 1e-4,
                noise_sigma: 0.05,
                test_noise: true,
                trials: 100,
                seed: 1,
                centers: centers(SINC_WIDTH),
                gis_points: 0,
                sigmas: Vec::new(),
                analyze_methods: vec![Method::GcnnEc, Method::GisLagrange],
                grid_points: 401,
            },
            _ => Self {
                experiment,
                method: if experiment == Experiment::PdeNeumannIntegrated {
                    Method::GcnnEcI
                } else {
                    Method::GcnnEc
                },
                n_train: 121,
                n_test: 321,
                n_rbf: 10,
                gamma: 0.5,
                noise_sigma: if experiment == Experiment::PdeDirichlet {
                    0.1
                } else {
                    0.0
                },
                test_noise: true,
                trials: 100,
                seed: 1,
                centers: centers(PDE_WIDTH),
                gis_points: if experiment == Experiment::PdeDirichlet { 5 } else { 0 },
                sigmas: Vec::new(),
                analyze_methods: vec![Method::GcnnEc, Method::GisLagrange],
                grid_points: 41,
            },
        }
    }

    /// Parses a config file body. `experiment` must be present; every other
    /// key falls back to the experiment's defaults.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_overrides(text, &[])
    }

    /// Like [`ExperimentConfig::parse`], then applies `overrides` (each
    /// `key=value`) on top of the file.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected key = value", i + 1)))?;
            let k = k.trim().to_string();
            if pairs.iter().any(|(p, _)| *p == k) {
                return Err(config_err(format!("line {}: duplicate key '{k}'", i + 1)));
            }
            pairs.push((k, v.trim().to_string()));
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| config_err(format!("override '{o}' must be key=value")))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            match pairs.iter_mut().find(|(p, _)| *p == k) {
                Some(slot) => slot.1 = v,
                None => pairs.push((k, v)),
            }
        }

        let experiment: Experiment = pairs
            .iter()
            .find(|(k, _)| k == "experiment")
            .ok_or_else(|| config_err("config must set 'experiment'"))?
            .1
            .parse()?;
        let mut cfg = Self::defaults(experiment);
        let mut kind = cfg.centers.kind;
        let mut width = cfg.centers.width;
        for (k, v) in &pairs {
            match k.as_str() {
                "experiment" => {}
                "method" => cfg.method = v.parse()?,
                "n_train" => cfg.n_train = num(k, v)?,
                "n_test" => cfg.n_test = num(k, v)?,
                "n_rbf" => cfg.n_rbf = num(k, v)?,
                "gamma" => cfg.gamma = num(k, v)?,
                "noise_sigma" => cfg.noise_sigma = num(k, v)?,
                "test_noise" => cfg.test_noise = num(k, v)?,
                "trials" => cfg.trials = num(k, v)?,
                "seed" => cfg.seed = num(k, v)?,
                "centers" => kind = v.parse()?,
                "width" => width = v.parse()?,
                "gis_points" => cfg.gis_points = num(k, v)?,
                "grid_points" => cfg.grid_points = num(k, v)?,
                "sigmas" => {
                    cfg.sigmas = list(v).map(|s| num(k, s)).collect::<Result<_>>()?;
                }
                "analyze_methods" => {
                    cfg.analyze_methods = list(v).map(str::parse).collect::<Result<_>>()?;
                }
                other => return Err(config_err(format!("unknown key '{other}'"))),
            }
        }
        cfg.centers = CenterPolicy::new(kind, width).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_train", self.n_train),
            ("n_test", self.n_test),
            ("n_rbf", self.n_rbf),
            ("trials", self.trials),
            ("grid_points", self.grid_points),
        ] {
            if v == 0 {
                return Err(config_err(format!("{name} must be at least 1")));
            }
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(config_err(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(config_err(format!(
                "noise_sigma must be nonnegative, got {}",
                self.noise_sigma
            )));
        }
        if self.sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(config_err("sigmas must all be positive"));
        }
        if self.analyze_methods.is_empty() {
            return Err(config_err("analyze_methods must name at least one method"));
        }
        Ok(())
    }

    /// Trial seeds are `seed + t`.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add(trial as u64)
    }
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| config_err(format!("bad value '{v}' for '{key}'")))
}

impl fmt::Display for ExperimentConfig {
    /// Canonical form; parsing it back yields the same config.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: Vec<String>| v.join(",");
        writeln!(f, "experiment = {}", self.experiment)?;
        writeln!(f, "method = {}", self.method)?;
        writeln!(f, "n_train = {}", self.n_train)?;
        writeln!(f, "n_test = {}", self.n_test)?;
        writeln!(f, "n_rbf = {}", self.n_rbf)?;
        writeln!(f, "gamma = {}", self.gamma)?;
        writeln!(f, "noise_sigma = {}", self.noise_sigma)?;
        writeln!(f, "test_noise = {}", self.test_noise)?;
        writeln!(f, "trials = {}", self.trials)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "centers = {}", self.centers.kind)?;
        writeln!(f, "width = {}", self.centers.width)?;
        writeln!(f, "gis_points = {}", self.gis_points)?;
        if !self.sigmas.is_empty() {
            writeln!(
                f,
                "sigmas = {}",
                join(self.sigmas.iter().map(|s| s.to_string()).collect())
            )?;
        }
        writeln!(
            f,
            "analyze_methods = {}",
            join(self.analyze_methods.iter().map(|m| m.to_string()).collect())
        )?;
        writeln!(f, "grid_points = {}", self.grid_points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_keys() {
        let cfg = ExperimentConfig::parse("experiment = sinc\n").unwrap();
        assert_eq!(cfg, ExperimentConfig::defaults(Experiment::Sinc));
        assert_eq!(cfg.n_rbf, 11);
        assert_eq!(cfg.gamma, 1e-4);
    }

    #[test]
    fn file_values_and_overrides() {
        let text = "# comment\nexperiment = pde-dirichlet\nn_rbf = 12  # inline\nwidth = nn:1.5\n";
        let cfg = ExperimentConfig::parse_with_overrides(text, &["n_rbf=14".into(), "method=rbfnn".into()]).unwrap();
        assert_eq!(cfg.n_rbf, 14);
        assert_eq!(cfg.method, Method::Rbfnn);
        assert_eq!(cfg.centers.width, WidthRule::NearestNeighbor(1.5));
        assert_eq!(cfg.noise_sigma, 0.1);
    }

    #[test]
    fn display_round_trips() {
        let mut cfg = ExperimentConfig::defaults(Experiment::Sinc);
        cfg.sigmas = vec![0.05, 0.1];
        cfg.test_noise = false;
        cfg.centers.kind = CenterKind::UniformGrid;
        assert_eq!(ExperimentConfig::parse(&cfg.to_string()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "n_rbf = 3\n",
            "experiment = sinc\nbogus = 1\n",
            "experiment = sinc\ntrials = 0\n",
            "experiment = sinc\ngamma = -1\n",
            "experiment = sinc\nn_rbf = x\n",
            "experiment = sinc\nn_rbf = 3\nn_rbf = 4\n",
            "experiment = sinc\nmethod = magic\n",
            "experiment = sinc\nwidth = const:0\n",
            "experiment = sinc\nno equals sign\n",
        ] {
            assert!(matches!(ExperimentConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }
}
