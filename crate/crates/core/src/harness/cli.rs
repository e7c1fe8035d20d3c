//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::filter::FilterConfig;
use crate::oracle::{validate_model_recursion, EnsembleSetup, ModelCheck, ModelReport};
use crate::partition::{AttractorMode, GroupPartition};
use crate::signal::{paper_plants, InputProcess};

use super::calibrate::{calibrate, CalibrationOptions};
use super::config::{ExperimentConfig, OutputFormat};
use super::emit::emit_curves;
use super::experiment::{run_experiment_with_workers, ExperimentOutput};

/// Environment variable naming the base directory for results.
pub const OUT_DIR_ENV: &str = "GRZA_VP_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "grza-vp", version, about = "Group zero-attracting LMS experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        exec: Execution,
    },
    /// Built-in system identification with white Gaussian input.
    PaperExp1 {
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        exec: Execution,
    },
    /// Built-in system identification with correlated non-Gaussian input.
    PaperExp2 {
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        exec: Execution,
    },
    /// Compare ensemble MSD increments with the transient model.
    ValidateModel(ValidateArgs),
    /// Print a built-in configuration with all defaults resolved.
    ShowConfig {
        #[arg(value_enum, default_value_t = Builtin::Exp1)]
        experiment: Builtin,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Re-derive the fixed-parameter baselines of a built-in experiment.
    Calibrate {
        #[arg(value_enum, default_value_t = Builtin::Exp1)]
        experiment: Builtin,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Builtin {
    Exp1,
    Exp2,
}

impl Builtin {
    fn config(self) -> ExperimentConfig {
        match self {
            Builtin::Exp1 => ExperimentConfig::paper_exp1(),
            Builtin::Exp2 => ExperimentConfig::paper_exp2(),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Both,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Both => OutputFormat::Both,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
struct Overrides {
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        if let Some(i) = self.iterations {
            cfg.iterations = i;
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(f) = self.format {
            cfg.format = f.into();
        }
        cfg.validate()
    }
}

#[derive(Debug, Clone, Default, Args)]
struct Execution {
    /// Output directory (overrides the config and the environment).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: one per core).
    #[arg(long)]
    workers: Option<usize>,
    /// Suppress the summary table.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 5000)]
    ensemble: usize,
    #[arg(long, default_value_t = 50)]
    horizon: usize,
    #[arg(long, default_value_t = 0.005)]
    mu: f64,
    /// Shrinkage values to check; repeat or comma-separate.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 1e-4])]
    rho: Vec<f64>,
    #[arg(long, default_value_t = 35)]
    len: usize,
    #[arg(long, default_value_t = 5)]
    group_size: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.01)]
    noise_variance: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Largest acceptable relative deviation; exceeding it is an error.
    #[arg(long, default_value_t = 0.05)]
    tolerance: f64,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    workers: Option<usize>,
}

/// Resolves where results go: flag, then config, then
/// `$GRZA_VP_OUT_DIR/<name>`, then `results/<name>`.
pub fn resolve_output_dir(flag: Option<&Path>, cfg: &ExperimentConfig, env: Option<OsString>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.output_dir {
        return PathBuf::from(p);
    }
    match env.filter(|v| !v.is_empty()) {
        Some(base) => PathBuf::from(base).join(&cfg.name),
        None => Path::new("results").join(&cfg.name),
    }
}

fn print_summary(out: &mut impl Write, output: &ExperimentOutput, dir: &Path) -> std::io::Result<()> {
    writeln!(
        out,
        "{}: {} runs x {} iterations, seed {}, config {}",
        output.config.name,
        output.config.runs,
        output.config.iterations,
        output.config.master_seed,
        &output.config_hash[..12]
    )?;
    writeln!(
        out,
        "input power: nominal {:.4}, measured {:.4}",
        output.nominal_input_power, output.measured_input_power
    )?;
    write!(out, "{:<10}", "algorithm")?;
    for (i, s) in output.stages.iter().enumerate() {
        write!(out, " {:>16}", format!("stage{} [{},{})", i + 1, s.start, s.end))?;
    }
    writeln!(out, " {:>9} {:>9}", "diverged", "fallback")?;
    for s in &output.summaries {
        write!(out, "{:<10}", s.name)?;
        for db in &s.steady_state_db {
            write!(out, " {:>13.2} dB", db)?;
        }
        let fb = s.fallback_rate.map_or("-".to_string(), |r| format!("{r:.4}"));
        writeln!(out, " {:>9} {:>9}", s.diverged_runs, fb)?;
    }
    writeln!(out, "wrote {}", dir.display())
}

fn execute(mut cfg: ExperimentConfig, overrides: &Overrides, exec: &Execution) -> Result<()> {
    overrides.apply(&mut cfg)?;
    let dir = resolve_output_dir(exec.out.as_deref(), &cfg, std::env::var_os(OUT_DIR_ENV));
    let output = run_experiment_with_workers(&cfg, exec.workers)?;
    emit_curves(&output, &dir)?;
    if !exec.quiet {
        print_summary(&mut std::io::stdout().lock(), &output, &dir).map_err(|e| Error::io(Path::new("<stdout>"), e))?;
    }
    Ok(())
}

fn validate_model(args: &ValidateArgs) -> Result<Vec<ModelReport>> {
    let partition = GroupPartition::contiguous(args.len, args.group_size)?;
    let plant = if args.len == 35 {
        paper_plants()[0].clone()
    } else {
        (0..args.len).map(|i| if i % 2 == 0 { 0.5 } else { 0.0 }).collect()
    };
    let mut reports = Vec::with_capacity(args.rho.len());
    for &rho in &args.rho {
        let filter = FilterConfig::new(partition.clone(), Some(AttractorMode::grza(args.epsilon)?))?.fixed(args.mu, rho)?;
        let check = ModelCheck {
            setup: EnsembleSetup {
                plant: plant.clone(),
                input: InputProcess::WhiteGaussian { variance: 1.0 },
                sigma_z2: args.noise_variance,
                filter,
                w0: None,
                seed: args.seed,
            },
            horizon: args.horizon,
            ensemble: args.ensemble,
        };
        reports.push(validate_model_recursion(&check)?);
    }
    Ok(reports)
}

fn run_validate(args: &ValidateArgs) -> Result<()> {
    let reports = match args.workers {
        None => validate_model(args)?,
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| validate_model(args))?,
    };
    let mut out = std::io::stdout().lock();
    let io = |e| Error::io(Path::new("<stdout>"), e);
    if args.json {
        serde_json::to_writer_pretty(&mut out, &reports).map_err(|e| Error::Config(e.to_string()))?;
        writeln!(out).map_err(io)?;
    } else {
        for r in &reports {
            writeln!(
                out,
                "mu={} rho={} ensemble={} horizon={}: max relative deviation {:.4} ({})",
                r.mu,
                r.rho,
                r.ensemble,
                r.horizon,
                r.max_relative_deviation,
                if r.max_relative_deviation <= args.tolerance { "ok" } else { "EXCEEDED" }
            )
            .map_err(io)?;
        }
    }
    if let Some(r) = reports.iter().find(|r| !(r.max_relative_deviation <= args.tolerance)) {
        return Err(Error::Model(format!(
            "rho={}: deviation {:.4} exceeds tolerance {}",
            r.rho, r.max_relative_deviation, args.tolerance
        )));
    }
    Ok(())
}

fn run_calibrate(experiment: Builtin, runs: usize, json: bool) -> Result<()> {
    let opts = CalibrationOptions {
        runs,
        ..CalibrationOptions::default()
    };
    let report = calibrate(&experiment.config(), &opts)?;
    let mut out = std::io::stdout().lock();
    let io = |e| Error::io(Path::new("<stdout>"), e);
    if json {
        serde_json::to_writer_pretty(&mut out, &report).map_err(|e| Error::Config(e.to_string()))?;
        writeln!(out).map_err(io)?;
        return Ok(());
    }
    writeln!(out, "target slope {:.5} dB/iter, seed {}, {} runs", report.target_slope_db, report.seed, report.runs).map_err(io)?;
    writeln!(out, "{:>12} {:>12}", "mu", "lms slope").map_err(io)?;
    for (mu, s) in &report.mu_scan {
        writeln!(out, "{mu:>12.6} {s:>12.5}").map_err(io)?;
    }
    writeln!(out, "{:>12} {:>12} {:>12}", "rho", "gza dB", "grza dB").map_err(io)?;
    for ((rho, a), (_, b)) in report.gza_scan.iter().zip(&report.grza_scan) {
        writeln!(out, "{rho:>12.3e} {a:>12.3} {b:>12.3}").map_err(io)?;
    }
    writeln!(
        out,
        "(mu, rho_gza, rho_grza) = ({}, {}, {})",
        report.mu, report.rho_gza, report.rho_grza
    )
    .map_err(io)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, overrides, exec } => execute(ExperimentConfig::load(&config)?, &overrides, &exec),
        Command::PaperExp1 { overrides, exec } => execute(ExperimentConfig::paper_exp1(), &overrides, &exec),
        Command::PaperExp2 { overrides, exec } => execute(ExperimentConfig::paper_exp2(), &overrides, &exec),
        Command::ValidateModel(args) => run_validate(&args),
        Command::ShowConfig { experiment, overrides } => {
            let mut cfg = experiment.config();
            overrides.apply(&mut cfg)?;
            print!("{}", cfg.to_toml()?);
            Ok(())
        }
        Command::Calibrate { experiment, runs, json } => run_calibrate(experiment, runs, json),
    }
}

/// Parses `args` (program name first) and runs the command. Returns 0 on
/// success, 1 on a runtime failure and 2 on a usage error.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Parameter(_) => 2,
                _ => 1,
            }
        }
    }
}
