use std::path::PathBuf;

use clap::{Args, ValueEnum};
use eben_core::degrade::{degrade_detailed, DegradationConfig, NoiseReference};
use eben_core::signal::{write_wav, WavEncoding};
use serde_json::json;

use crate::output::{read, CliError, Output};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Reference {
    Filtered,
    Clean,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Encoding {
    Float32,
    Pcm16,
}

impl From<Encoding> for WavEncoding {
    fn from(e: Encoding) -> Self {
        match e {
            Encoding::Float32 => WavEncoding::Float32,
            Encoding::Pcm16 => WavEncoding::Pcm16,
        }
    }
}

#[derive(Debug, Args)]
pub struct DegradeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Lowpass cutoff in Hz.
    #[arg(long, default_value_t = 600.0)]
    cutoff: f64,
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Signal-to-noise ratio of the added white noise, in dB.
    #[arg(long, default_value_t = 23.0)]
    snr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Power the noise level is measured against.
    #[arg(long, value_enum, default_value_t = Reference::Filtered)]
    noise_reference: Reference,
    #[arg(long, value_enum, default_value_t = Encoding::Float32)]
    encoding: Encoding,
}

pub fn run(a: DegradeArgs) -> Result<Output, CliError> {
    let x = read(&a.input)?;
    if x.is_empty() {
        return Err(CliError::Data(format!("{}: no samples", a.input.display())));
    }
    let config = DegradationConfig {
        cutoff_hz: a.cutoff,
        q_factor: a.q,
        noise_snr_db: a.snr,
        seed: a.seed,
        noise_reference: match a.noise_reference {
            Reference::Filtered => NoiseReference::Filtered,
            Reference::Clean => NoiseReference::Clean,
        },
    };
    let d = degrade_detailed(&x, &config)?;
    write_wav(&d.output, &a.out, a.encoding.into())?;
    let snr = d.measured_snr_db();
    Ok(Output::new(
        json!({
            "input": a.input,
            "output": a.out,
            "samples": x.len(),
            "sample_rate_hz": x.sample_rate_hz(),
            "config": config,
            "measured_snr_db": snr,
        }),
        format!(
            "{} -> {} ({} samples, cutoff {} Hz, Q {}, seed {}), measured noise SNR {snr:.3} dB\n",
            a.input.display(),
            a.out.display(),
            x.len(),
            a.cutoff,
            a.q,
            a.seed
        ),
    ))
}
