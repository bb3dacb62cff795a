use std::path::PathBuf;

use clap::{Args, Subcommand};
use eben_core::metrics::{batch_evaluate, read_manifest, MetricKind};
use serde_json::json;

use crate::output::{create, fmt_f, read, CliError, Output};

#[derive(Debug, Subcommand)]
pub enum MetricCommand {
    /// Scale-invariant signal-to-distortion ratio in dB.
    SiSdr(PairArgs),
    /// Short-time objective intelligibility.
    Stoi(PairArgs),
    /// Every pair of a `reference,estimate` manifest.
    Batch {
        manifest: PathBuf,
        /// Metrics to compute, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = ["si-sdr".to_string(), "stoi".to_string()])]
        metrics: Vec<String>,
        /// Per-row CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct PairArgs {
    reference: PathBuf,
    estimate: PathBuf,
}

fn single(kind: MetricKind, a: PairArgs) -> Result<Output, CliError> {
    let r = read(&a.reference)?;
    let e = read(&a.estimate)?;
    if r.len() != e.len() {
        return Err(CliError::Data(format!("length mismatch: {} vs {} samples", r.len(), e.len())));
    }
    let report = kind.evaluate(&r, &e)?;
    let text = match &report.detail {
        Some(d) => format!("{} {} ({d})\n", report.name, fmt_f(report.value)),
        None => format!("{} {}\n", report.name, fmt_f(report.value)),
    };
    Ok(Output::new(serde_json::to_value(&report).expect("serializable report"), text))
}

pub fn run(cmd: MetricCommand) -> Result<Output, CliError> {
    match cmd {
        MetricCommand::SiSdr(a) => single(MetricKind::SiSdr, a),
        MetricCommand::Stoi(a) => single(MetricKind::Stoi, a),
        MetricCommand::Batch { manifest, metrics, out } => {
            let kinds = metrics
                .iter()
                .map(|m| m.parse::<MetricKind>().map_err(|e| CliError::Usage(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            let pairs = read_manifest(&manifest)?;
            let table = batch_evaluate(&pairs, &kinds);
            if let Some(path) = &out {
                let w = create(path)?;
                table.write_csv(w)?;
            }
            let summary = table.summary();
            let invalid = table.rows.iter().filter(|r| !r.report.valid).count();
            let mut text = format!("{} pairs, {invalid} invalid rows\n", pairs.len());
            for (name, s) in &summary {
                text.push_str(&format!("{name}: median {} (IQR {}), n = {}\n", fmt_f(s.median), fmt_f(s.iqr), s.n));
            }
            Ok(Output::new(
                json!({
                    "pairs": pairs.len(),
                    "invalid_rows": invalid,
                    "summary": summary,
                    "csv": out,
                }),
                text,
            ))
        }
    }
}
