use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fairweigh::dataset::{generate_synthetic, write_csv};
use fairweigh::harness::{
    emit_results, grid_search, read_records, render, run_experiment, ExperimentConfig, GridSpec,
    OutputFormat,
};

/// Fair classification by adaptive priority reweighing.
#[derive(Parser)]
#[command(name = "fairweigh", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the replications of an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output file; defaults to `<name>.<ext>` under FAIRWEIGH_OUT_DIR.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "json")]
        format: OutputFormat,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Cross-validate (alpha, eta) on the first replication's training split.
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render a JSON result file.
    Report {
        file: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: OutputFormat,
    },
    /// Write a synthetic dataset as CSV.
    Synth {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        bias: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Failures that are the caller's fault exit with 2, like clap's own.
enum Failure {
    Usage(String),
    Run(fairweigh::Error),
}

impl From<fairweigh::Error> for Failure {
    fn from(e: fairweigh::Error) -> Self {
        Failure::Run(e)
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    if !path.is_file() {
        return Err(Failure::Usage(format!(
            "config file not found: {}",
            path.display()
        )));
    }
    ExperimentConfig::from_file(path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn default_out(name: &str, ext: &str) -> PathBuf {
    let dir = std::env::var_os("FAIRWEIGH_OUT_DIR")
        .map_or_else(|| PathBuf::from("results"), PathBuf::from);
    dir.join(format!("{name}.{ext}"))
}

fn extension(format: OutputFormat) -> &'static str {
    match format {
        OutputFormat::Json => "json",
        OutputFormat::Csv => "csv",
        OutputFormat::Markdown => "md",
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            config,
            out,
            format,
            seed,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let record = run_experiment(&cfg)?;
            let out = out.unwrap_or_else(|| default_out(&cfg.name, extension(format)));
            emit_results(std::slice::from_ref(&record), format, &out)?;
            log::info!("wrote {}", out.display());
            print!("{}", render(&[record], OutputFormat::Markdown)?);
        }
        Command::Grid { config, out } => {
            let cfg = load_config(&config)?;
            let spec = cfg.tune.clone().unwrap_or_else(GridSpec::default);
            let outcome = grid_search(&cfg, &spec)?;
            let json = serde_json::to_string_pretty(&outcome).map_err(fairweigh::Error::from)?;
            match out {
                Some(path) => std::fs::write(&path, json + "\n")
                    .map_err(|e| Failure::Run(fairweigh::Error::Io { path, source: e }))?,
                None => println!("{json}"),
            }
            eprintln!(
                "selected alpha={} eta={}",
                outcome.best.alpha, outcome.best.eta
            );
        }
        Command::Report { file, format } => {
            if !file.is_file() {
                return Err(Failure::Usage(format!(
                    "result file not found: {}",
                    file.display()
                )));
            }
            print!("{}", render(&read_records(&file)?, format)?);
        }
        Command::Synth { n, bias, seed, out } => {
            let ds =
                generate_synthetic(n, bias, seed).map_err(|e| Failure::Usage(e.to_string()))?;
            write_csv(&ds, &out)?;
            eprintln!("wrote {n} rows to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
