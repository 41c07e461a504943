use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use surrogate_newton::error::{Error, Result};
use surrogate_newton::experiments::{
    emit_report, run_experiment, ConfigFile, Experiment, ExperimentConfig, OutputFormat,
};

#[derive(Parser)]
#[command(name = "surrogate-newton", version, about = "Debiased distributed Newton experiments")]
struct Cli {
    /// Flat TOML configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when omitted
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads for the rayon pool
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Effective dimension and scaled regularizer over λ and m grids
    EffectiveDim,
    /// Bias of averaged sketch-and-solve estimates against q
    BiasSweep,
    /// Surrogate sketch against unweighted and determinantal averaging
    AvgCompare,
    /// Distributed IHS / Newton-sketch convergence traces
    Converge,
    /// Bias over a grid of local regularizers
    LpSweep,
    /// DPP samplers against the enumeration oracle
    DppCheck,
    /// Spectral error of averaged inverse sketched Hessians against q
    Concentration,
}

impl Command {
    fn experiment(self) -> Experiment {
        match self {
            Command::EffectiveDim => Experiment::EffectiveDim,
            Command::BiasSweep => Experiment::BiasSweep,
            Command::AvgCompare => Experiment::AveragingComparison,
            Command::Converge => Experiment::Convergence,
            Command::LpSweep => Experiment::LambdaPrimeSweep,
            Command::DppCheck => Experiment::DppCheck,
            Command::Concentration => Experiment::Concentration,
        }
    }
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let experiment = cli.command.experiment();
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(&ConfigFile::load(path)?, Some(experiment))?,
        None => ExperimentConfig::defaults(experiment),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    if let Some(f) = cli.format {
        cfg.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let report = run_experiment(&cfg)?;
    match &cfg.out {
        Some(path) => emit_report(&report, cfg.format, path),
        None => {
            let body = report.render(cfg.format)?;
            std::io::stdout()
                .write_all(body.as_bytes())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
