use anyhow::Result;
use clap::{Parser, Subcommand};
use flsim_cli::config::{ConfigError, ExperimentConfig, OutputFormat};
use flsim_cli::runner::{self, SweepAxis};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "flsim",
    about = "Deterministic federated-learning simulator with byzantine-robust aggregation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Experiment configuration file (flat dotted keys, or flat JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Experiment seed (overrides the file)
    #[arg(long)]
    seed: Option<u64>,
    /// Report format
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    match s {
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        "both" => Ok(OutputFormat::Both),
        other => Err(format!("unknown format `{other}` (csv, json, both)")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its reports
    Run(ConfigArgs),
    /// Run a sweep over one axis; writes a combined CSV keyed by value
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Sweep axis: malicious_fraction, q, or k
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated axis values
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Parse and validate a configuration, printing the effective settings
    Validate(ConfigArgs),
    /// Evaluate a brute-force oracle on a JSON fixture
    Oracle {
        /// One of: trimmed-mean, krum-score, ahc, nt-xent
        subcommand: String,
        /// Fixture file (JSON)
        fixture: PathBuf,
    },
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig, ExitCode> {
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return Err(ExitCode::from(2));
        }
    };
    match ExperimentConfig::from_text(&text, args.seed, args.out.clone(), args.format) {
        Ok(cfg) => Ok(cfg),
        Err(ConfigError(diags)) => {
            eprintln!("invalid configuration ({}):", args.config.display());
            for d in diags {
                eprintln!("  {d}");
            }
            Err(ExitCode::from(2))
        }
    }
}

fn main() -> ExitCode {
    flsim_cli::init_thread_caps();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let cfg = match load_config(&args) {
                Ok(c) => c,
                Err(code) => return code,
            };
            match runner::run_and_write(&cfg) {
                Ok(report) => {
                    println!(
                        "final accuracy {:.4} over {} rounds (tail mean {:.4} +- {:.4})",
                        report.final_accuracy,
                        report.rounds.len(),
                        report.tail_mean,
                        report.tail_std
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Sweep {
            config,
            axis,
            values,
        } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if values.is_empty() {
                eprintln!("error: --values must list at least one value");
                return ExitCode::from(2);
            }
            match runner::run_sweep(&cfg, axis, &values) {
                Ok(results) => {
                    for (value, report) in &results {
                        println!(
                            "{} = {value}: final accuracy {:.4}",
                            axis.name(),
                            report.final_accuracy
                        );
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Validate(args) => {
            let cfg = match load_config(&args) {
                Ok(c) => c,
                Err(code) => return code,
            };
            for (k, v) in &cfg.echo {
                println!("{k} = {v}");
            }
            ExitCode::SUCCESS
        }
        Command::Oracle {
            subcommand,
            fixture,
        } => match flsim_cli::oracle::run_oracle(&subcommand, &fixture) {
            Ok(json) => {
                println!("{json}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
