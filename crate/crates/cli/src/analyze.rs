use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use eben_core::signal::Signal;
use eben_core::spectral::{spectrogram, welch_cross, SpectralEstimate, SpectrogramConfig, WelchConfig};
use serde_json::json;

use crate::output::{create, fmt_f, read, write_csv, CliError, Output};

/// Energy below 600 Hz must exceed energy above 2 kHz by this much for a
/// spectrogram to count as body-conducted.
const SUPPRESSION_DB: f64 = 30.0;

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Magnitude-squared coherence between two recordings.
    Coherence(PairArgs),
    /// H1 transfer function from the first recording to the second.
    Transfer(PairArgs),
    /// Short-time magnitude spectrum in dB.
    Spectrogram {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = MatrixFormat::Csv)]
        format: MatrixFormat,
        #[arg(long, default_value_t = 512)]
        frame: usize,
        #[arg(long, default_value_t = 128)]
        hop: usize,
        #[arg(long, default_value_t = -80.0, allow_hyphen_values = true)]
        floor: f64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MatrixFormat {
    Csv,
    /// Little-endian f32 matrix plus a `.json` sidecar.
    Raw,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// Reference (input) recording.
    x: PathBuf,
    /// Compared (output) recording.
    y: PathBuf,
    #[arg(long, default_value_t = 1024)]
    segment: usize,
    #[arg(long, default_value_t = 0.5)]
    overlap: f64,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn estimate(a: &PairArgs) -> Result<SpectralEstimate, CliError> {
    let x = read(&a.x)?;
    let y = read(&a.y)?;
    if x.len() != y.len() {
        return Err(CliError::Data(format!("length mismatch: {} vs {} samples", x.len(), y.len())));
    }
    Ok(welch_cross(&x, &y, &WelchConfig { segment_len: a.segment, overlap: a.overlap })?)
}

fn emit(a: &PairArgs, header: &str, rows: Vec<String>, json: serde_json::Value) -> Result<Output, CliError> {
    match &a.out {
        Some(path) => {
            let n = rows.len();
            write_csv(path, header, rows)?;
            let mut j = json;
            j["path"] = json!(path);
            Ok(Output::new(j, format!("{n} rows -> {}\n", path.display())))
        }
        None => {
            let mut text = format!("{header}\n");
            for r in rows {
                text.push_str(&r);
                text.push('\n');
            }
            Ok(Output::new(json, text))
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_else(|| "nan".into())
}

pub fn run(cmd: AnalyzeCommand) -> Result<Output, CliError> {
    match cmd {
        AnalyzeCommand::Coherence(a) => {
            let est = estimate(&a)?;
            let coh = est.coherence_unclamped()?;
            let rows = est.frequencies_hz.iter().zip(&coh).map(|(f, c)| format!("{},{}", fmt_f(*f), opt(*c))).collect();
            let j = json!({
                "segments": est.segments,
                "frequency_hz": est.frequencies_hz,
                "coherence": coh,
            });
            emit(&a, "frequency_hz,coherence", rows, j)
        }
        AnalyzeCommand::Transfer(a) => {
            let est = estimate(&a)?;
            let h = est.transfer_function()?;
            let mag: Vec<Option<f64>> = h.iter().map(|v| v.map(|c| 20.0 * c.norm().log10())).collect();
            let phase: Vec<Option<f64>> = h.iter().map(|v| v.map(|c| c.arg())).collect();
            let rows = est
                .frequencies_hz
                .iter()
                .zip(mag.iter().zip(&phase))
                .map(|(f, (m, p))| format!("{},{},{}", fmt_f(*f), opt(*m), opt(*p)))
                .collect();
            let j = json!({
                "segments": est.segments,
                "frequency_hz": est.frequencies_hz,
                "magnitude_db": mag,
                "phase_rad": phase,
            });
            emit(&a, "frequency_hz,magnitude_db,phase_rad", rows, j)
        }
        AnalyzeCommand::Spectrogram { input, out, format, frame, hop, floor } => {
            let x: Signal = read(&input)?;
            let s = spectrogram(&x, &SpectrogramConfig { frame, hop, floor_db: floor })?;
            match format {
                MatrixFormat::Csv => {
                    let mut w = create(&out)?;
                    s.write_csv(&mut w)?;
                }
                MatrixFormat::Raw => s.write_raw(&out)?,
            }
            let low = s.mean_band_db(0.0, 600.0);
            let high = s.mean_band_db(2000.0, f64::INFINITY);
            let margin = low - high;
            Ok(Output::new(
                json!({
                    "path": out,
                    "rows": s.rows,
                    "cols": s.cols,
                    "floor_db": s.floor_db,
                    "mean_below_600_hz_db": low,
                    "mean_above_2_khz_db": high,
                    "suppression_db": margin,
                    "high_band_suppressed": margin >= SUPPRESSION_DB,
                }),
                format!(
                    "{} x {} -> {}; below 600 Hz {low:.1} dB, above 2 kHz {high:.1} dB, suppression {margin:.1} dB\n",
                    s.rows,
                    s.cols,
                    out.display()
                ),
            ))
        }
    }
}
