use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lifnet::analysis::{write_coupling_csv, write_modification_csv, write_weights_csv};
use lifnet::bench::{
    boundary_trace, fit_trial, run_coupling_study, run_experiment, run_weight_study, write_report_csv, write_trace_svg,
    Experiment, ExperimentConfig,
};
use lifnet::gcnn::{predict_constrained, predict_constrained_derivative};
use lifnet::model_io::{load_gcnn, save_gcnn};
use lifnet::{Error, Matrix};

#[derive(Parser)]
#[command(name = "lifnet", version, about = "Constrained RBF regression and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchTarget {
    Sinc,
    PdeDirichlet,
    PdeNeumann,
    PdeNeumannIntegrated,
}

#[derive(Clone, Copy, ValueEnum)]
enum Study {
    Coupling,
    Weights,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Experiment config file (key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Override a config key; repeatable, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run repeated trials of a benchmark and write per-trial errors.
    Bench {
        experiment: BenchTarget,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Fitting method (rbfnn, gis-lagrange, gcnn-ec, gcnn-ec-i).
        #[arg(long)]
        method: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Run trials on this many threads.
        #[arg(long, value_name = "N")]
        parallel_trials: Option<usize>,
    },
    /// Coupling or weight-change diagnostics of constrained fits.
    Analyze {
        study: Study,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Fit one trial of a config and save the model to OUT/model.txt.
    Fit {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        method: Option<String>,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Evaluate a saved model on comma-separated input rows.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// One input point per line, coordinates separated by commas.
        #[arg(long)]
        input: PathBuf,
        /// Report the partial derivative along this axis instead of the value.
        #[arg(long, value_name = "AXIS")]
        derivative: Option<usize>,
        /// Write OUT/predictions.csv instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(args: &ConfigArgs, extra: &[String]) -> lifnet::Result<ExperimentConfig> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", args.config.display())))?;
    let mut overrides = args.overrides.clone();
    overrides.extend_from_slice(extra);
    ExperimentConfig::parse_with_overrides(&text, &overrides)
}

fn create(dir: &Path, name: &str) -> lifnet::Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn method_override(method: &Option<String>) -> Vec<String> {
    method.iter().map(|m| format!("method={m}")).collect()
}

fn bench(
    target: BenchTarget,
    cfg: &ConfigArgs,
    method: &Option<String>,
    out: &Path,
    threads: Option<usize>,
) -> lifnet::Result<()> {
    let config = load_config(cfg, &method_override(method))?;
    let wanted = match target {
        BenchTarget::Sinc => Experiment::Sinc,
        BenchTarget::PdeDirichlet => Experiment::PdeDirichlet,
        BenchTarget::PdeNeumann => Experiment::PdeNeumann,
        BenchTarget::PdeNeumannIntegrated => Experiment::PdeNeumannIntegrated,
    };
    let compatible = config.experiment == wanted || (config.experiment.is_neumann() && wanted.is_neumann());
    if !compatible {
        return Err(Error::Config(format!(
            "config describes experiment {}, not {wanted}",
            config.experiment
        )));
    }
    let report = run_experiment(&config, threads)?;
    let stem = format!("{}_{}", config.experiment, config.method);
    let mut csv = create(out, &format!("{stem}.csv"))?;
    write_report_csv(&mut csv, &report)?;
    csv.flush()?;
    let mut echo = create(out, &format!("{stem}.cfg"))?;
    write!(echo, "{config}")?;
    echo.flush()?;
    let mut svg = create(out, &format!("{stem}.svg"))?;
    write_trace_svg(&mut svg, &boundary_trace(&config)?)?;
    svg.flush()?;

    let (cm, cs) = report.cstr_stats();
    let (tm, ts) = report.test_stats();
    println!("{stem}: {} trials", report.trials.len());
    println!("  mse_cstr {cm:.4e} +- {cs:.4e}");
    println!("  mse_test {tm:.4e} +- {ts:.4e}");
    Ok(())
}

fn analyze(study: Study, cfg: &ConfigArgs, out: &Path) -> lifnet::Result<()> {
    let config = load_config(cfg, &[])?;
    match study {
        Study::Weights => {
            for s in run_weight_study(&config)? {
                let name = format!("weights_sigma{}_{}.csv", s.sigma, s.method);
                let mut f = create(out, &name)?;
                write_weights_csv(&mut f, &s.report)?;
                f.flush()?;
                let peak = s
                    .report
                    .peak_center()
                    .map(|j| format!("{}", s.report.center_coords[(j, 0)]));
                println!(
                    "{name}: peak change at center {}",
                    peak.unwrap_or_else(|| "none".into())
                );
            }
        }
        Study::Coupling => {
            for s in run_coupling_study(&config)? {
                let name = format!("coupling_sigma{}_{}.csv", s.sigma, s.method);
                let mut f = create(out, &name)?;
                match &s.coupling {
                    Some(report) => write_coupling_csv(&mut f, report)?,
                    None => write_modification_csv(&mut f, &s.grid, &s.fm)?,
                }
                f.flush()?;
                let ratio = s.locality.map(|r| format!("{r:.4}")).unwrap_or_else(|| "n/a".into());
                println!("{name}: locality ratio {ratio}");
            }
        }
    }
    Ok(())
}

fn fit(cfg: &ConfigArgs, method: &Option<String>, trial: usize, out: &Path) -> lifnet::Result<()> {
    let config = load_config(cfg, &method_override(method))?;
    let (_, model) = fit_trial(&config, trial)?;
    fs::create_dir_all(out)?;
    let path = out.join("model.txt");
    save_gcnn(&path, &model)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn read_points(path: &Path, d: usize) -> lifnet::Result<Matrix> {
    let reader = BufReader::new(File::open(path)?);
    let mut values = Vec::new();
    let mut n = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("bad input row '{line}'"),
            })?;
        if row.len() != d {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected {d} coordinates, got {}", row.len()),
            });
        }
        values.extend(row);
        n += 1;
    }
    Ok(Matrix::from_row_slice(n, d, &values))
}

fn predict(model: &Path, input: &Path, derivative: Option<usize>, out: &Option<PathBuf>) -> lifnet::Result<()> {
    let model = load_gcnn(model)?;
    let x = read_points(input, model.base().dim())?;
    let y = match derivative {
        Some(axis) => predict_constrained_derivative(&model, &x, axis)?,
        None => predict_constrained(&model, &x)?,
    };
    let mut sink: Box<dyn Write> = match out {
        Some(dir) => Box::new(create(dir, "predictions.csv")?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    writeln!(
        sink,
        "{}",
        if derivative.is_some() {
            "derivative"
        } else {
            "prediction"
        }
    )?;
    for v in y {
        writeln!(sink, "{v:e}")?;
    }
    sink.flush()?;
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) | Error::Infeasible(_) | Error::NotFitted => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Bench {
            experiment,
            cfg,
            method,
            out,
            parallel_trials,
        } => bench(*experiment, cfg, method, out, *parallel_trials),
        Command::Analyze { study, cfg, out } => analyze(*study, cfg, out),
        Command::Fit {
            cfg,
            method,
            trial,
            out,
        } => fit(cfg, method, *trial, out),
        Command::Predict {
            model,
            input,
            derivative,
            out,
        } => predict(model, input, *derivative, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
