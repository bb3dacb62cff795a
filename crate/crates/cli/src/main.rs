//! `eben`: filter banks, degradation, analysis, metrics and the EBEN
//! forward pass from the command line.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 internal error.

mod analyze;
mod degrade;
mod metric;
mod model;
mod output;
mod pqmf;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use output::{CliError, Output};

#[derive(Debug, Parser)]
#[command(name = "eben", version, about = "Subband speech enhancement toolkit")]
struct Cli {
    /// Print a single JSON document on stdout instead of a table.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// PQMF bank design, round trips and band responses.
    #[command(subcommand)]
    Pqmf(pqmf::PqmfCommand),
    /// Simulate an in-ear recording: lowpass plus white noise.
    Degrade(degrade::DegradeArgs),
    /// Coherence, transfer function and spectrogram data.
    #[command(subcommand)]
    Analyze(analyze::AnalyzeCommand),
    /// SI-SDR and STOI, single pairs or a manifest.
    #[command(subcommand)]
    Metric(metric::MetricCommand),
    /// Generator inference, losses and model size.
    #[command(subcommand)]
    Model(model::ModelCommand),
}

fn run(cli: Cli) -> Result<Output, CliError> {
    match cli.command {
        Command::Pqmf(c) => pqmf::run(c),
        Command::Degrade(a) => degrade::run(a),
        Command::Analyze(c) => analyze::run(c),
        Command::Metric(c) => metric::run(c),
        Command::Model(c) => model::run(c),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EBEN_LOG", "warn"))
        .target(env_logger::Target::Stderr)
        .init();

    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let json = cli.json;
    let result = std::panic::catch_unwind(|| run(cli));
    match result {
        Ok(Ok(out)) => {
            let mut stdout = std::io::stdout().lock();
            // a closed pipe (`| head`) is not an error worth reporting
            let _ = if json {
                writeln!(stdout, "{}", serde_json::to_string_pretty(&out.json).expect("serializable output"))
            } else {
                write!(stdout, "{}", out.text)
            };
            ExitCode::SUCCESS
        }
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            if json {
                println!("{}", serde_json::json!({ "error": e.to_string(), "exit_code": e.code() }));
            }
            ExitCode::from(e.code())
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(3)
        }
    }
}
