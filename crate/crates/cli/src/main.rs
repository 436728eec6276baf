use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use modelcs_cli::{
    cmd_bounds, cmd_modelcheck, cmd_noise, cmd_recover, cmd_sweep_m, cmd_sweep_n, CliError,
    Experiment, ExperimentConfig, RunOutput,
};

/// Model-based compressive sensing experiments.
#[derive(Debug, Parser)]
#[command(name = "modelcs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Key=value config file; '#' starts a comment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output CSV (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long = "N", global = true)]
    n: Option<usize>,
    #[arg(long = "K", global = true)]
    k: Option<usize>,
    #[arg(long = "M", global = true)]
    m: Option<usize>,
    #[arg(long = "J", global = true)]
    j: Option<usize>,
    /// Comma-separated model tags: plain, tree, block.
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Comma-separated noise standard deviations.
    #[arg(long = "sigma-grid", global = true)]
    sigma_grid: Option<String>,
    /// Any other config key, as KEY=VALUE (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single-configuration recovery over seeds.
    Recover,
    /// Error versus measurement count.
    SweepM,
    /// Minimal measurement count versus signal length.
    SweepN,
    /// Maximum error versus noise level.
    Noise,
    /// Measurement-bound tables.
    Bounds,
    /// Oracle and invariant self-checks; exits nonzero on failure.
    Modelcheck,
}

impl Command {
    fn experiment(&self) -> Experiment {
        match self {
            Command::Recover => Experiment::Recover,
            Command::SweepM => Experiment::SweepM,
            Command::SweepN => Experiment::SweepN,
            Command::Noise => Experiment::Noise,
            Command::Bounds => Experiment::Bounds,
            Command::Modelcheck => Experiment::Modelcheck,
        }
    }
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let experiment = cli.command.experiment();
    let mut cfg = ExperimentConfig::for_experiment(experiment);
    if let Some(path) = &cli.config {
        cfg.apply_text(&fs::read_to_string(path)?)?;
        if cfg.experiment != experiment {
            return Err(CliError::Usage(format!(
                "config is for '{}' but the command is '{}'",
                cfg.experiment, experiment
            )));
        }
    }
    for pair in &cli.set {
        cfg.set_pair(pair)?;
    }
    let seed = cli.seed.map(|v| v.to_string());
    let out = cli.out.as_ref().map(|p| p.display().to_string());
    let scalars = [
        ("seed", seed),
        ("out", out),
        ("N", cli.n.map(|v| v.to_string())),
        ("K", cli.k.map(|v| v.to_string())),
        ("M", cli.m.map(|v| v.to_string())),
        ("J", cli.j.map(|v| v.to_string())),
        ("model", cli.model.clone()),
        ("trials", cli.trials.map(|v| v.to_string())),
        ("sigma_grid", cli.sigma_grid.clone()),
    ];
    for (key, value) in scalars {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    Ok(cfg)
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => modelcs_cli::output::write_to(io::stdout().lock(), text)?,
    }
    Ok(())
}

/// `results.csv` → `results.summary.csv`.
fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.summary.csv"))
}

fn emit_run(cfg: &ExperimentConfig, run: &RunOutput) -> Result<(), CliError> {
    emit(cfg.out.as_deref(), &run.results_csv())?;
    match &cfg.out {
        Some(out) => fs::write(summary_path(out), run.summary_csv())?,
        None => eprint!("{}", run.summary_csv()),
    }
    if let (Some(path), Some(signal)) = (&cfg.signal_out, &run.signal) {
        fs::write(path, signal)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let cfg = build_config(cli)?;
    match cli.command {
        Command::Recover => emit_run(&cfg, &cmd_recover(&cfg)?)?,
        Command::SweepM => emit_run(&cfg, &cmd_sweep_m(&cfg)?)?,
        Command::SweepN => emit_run(&cfg, &cmd_sweep_n(&cfg)?)?,
        Command::Noise => emit_run(&cfg, &cmd_noise(&cfg)?)?,
        Command::Bounds => emit(cfg.out.as_deref(), &cmd_bounds(&cfg)?)?,
        Command::Modelcheck => {
            let (report, ok) = cmd_modelcheck(&cfg)?;
            emit(cfg.out.as_deref(), &report)?;
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("modelcheck: at least one check failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("modelcs: {e}");
            ExitCode::from(2)
        }
    }
}
