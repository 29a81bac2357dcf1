//! `lzsweep`: predict, simulate and optimize Landau-Zener sweeps.

// `!(x > 0.0)` is deliberate: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod failure;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;

use crate::commands::Output;
use crate::config::{RunConfig, CSV_CONFIG_PREFIX};
use crate::failure::{Failure, EXIT_CONFIG, EXIT_NUMERICAL};

#[derive(Parser)]
#[command(
    name = "lzsweep",
    version,
    about = "Landau-Zener sweeps under decoherence"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration, or a previous output of this tool.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Master seed; overrides `ensemble.master_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads. Changes speed only, never results.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Classify the noise and evaluate the closed-form estimates.
    Predict,
    /// Propagate a single sweep (one noise realization for classical noise).
    Simulate,
    /// Success probability at one sweep rate, averaged over trajectories.
    Ensemble,
    /// Success probability over a grid of sweep rates.
    Curve,
    /// Search for the sweep rate with the highest success probability.
    Optimize,
    /// Noise tolerance at crossings where M qubits flip together.
    Scaling,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Predict => "predict",
            Command::Simulate => "simulate",
            Command::Ensemble => "ensemble",
            Command::Curve => "curve",
            Command::Optimize => "optimize",
            Command::Scaling => "scaling",
        }
    }

    fn default_format(self) -> Format {
        match self {
            Command::Curve | Command::Scaling => Format::Csv,
            _ => Format::Json,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render(config: &RunConfig, output: &Output, format: Format) -> Result<Vec<u8>, Failure> {
    let to_json =
        |e: serde_json::Error| Failure::numerical(format!("cannot serialize output: {e}"));
    let mut buf = Vec::new();
    match format {
        Format::Json => {
            let doc = serde_json::json!({
                "config": config,
                "result": output.result,
            });
            serde_json::to_writer_pretty(&mut buf, &doc).map_err(to_json)?;
            buf.push(b'\n');
        }
        Format::Csv => {
            let line = serde_json::to_string(config).map_err(to_json)?;
            buf.extend_from_slice(format!("{CSV_CONFIG_PREFIX}{line}\n").as_bytes());
            match (&output.table, &output.result) {
                (Some(table), _) => buf.extend_from_slice(table),
                (None, Value::Object(map)) => {
                    buf.extend_from_slice(b"field,value\n");
                    for (k, v) in map {
                        let text = match v {
                            Value::String(s) => s.clone(),
                            other => other.to_string(),
                        };
                        buf.extend_from_slice(format!("{k},{}\n", csv_field(&text)).as_bytes());
                    }
                }
                (None, other) => {
                    buf.extend_from_slice(
                        format!("result\n{}\n", csv_field(&other.to_string())).as_bytes(),
                    );
                }
            }
        }
    }
    Ok(buf)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::config("--threads: must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(format!("--threads: {e}")))?;
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::config("--config: a configuration file is required"))?;
    let config = RunConfig::load(path)?.resolved(cli.command.name(), cli.seed);

    let output = match cli.command {
        Command::Predict => commands::predict_cmd(&config),
        Command::Simulate => commands::simulate_cmd(&config),
        Command::Ensemble => commands::ensemble_cmd(&config),
        Command::Curve => commands::curve_cmd(&config),
        Command::Optimize => commands::optimize_cmd(&config),
        Command::Scaling => commands::scaling_cmd(&config),
    }?;

    let format = cli.format.unwrap_or(cli.command.default_format());
    let bytes = render(&config, &output, format)?;
    match &cli.out {
        Some(out) => {
            std::fs::write(out, &bytes)
                .map_err(|e| Failure::numerical(format!("cannot write {}: {e}", out.display())))?;
            println!("{}", output.summary);
            println!("wrote {}", out.display());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(&bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::numerical(format!("cannot write output: {e}")))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            debug_assert!(f.code == EXIT_CONFIG || f.code == EXIT_NUMERICAL);
            ExitCode::from(f.code as u8)
        }
    }
}
