use std::path::PathBuf;

use clap::{Args, Subcommand};
use eben_core::pqmf::{reconstruction_snr_db, BankDocument, PqmfBank};
use serde_json::json;

use crate::output::{fmt_f, read, write_csv, CliError, Output};

#[derive(Debug, Subcommand)]
pub enum PqmfCommand {
    /// Design a bank and write it as JSON.
    Design {
        #[command(flatten)]
        bank: BankArgs,
        /// Destination file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analyze and resynthesize a WAV file, report the reconstruction SNR.
    Roundtrip {
        #[command(flatten)]
        bank: BankArgs,
        #[arg(long = "in")]
        input: PathBuf,
        /// Write the reconstruction here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Magnitude response of one analysis filter.
    Response {
        #[command(flatten)]
        bank: BankArgs,
        #[arg(long, default_value_t = 0)]
        band: usize,
        #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u32).range(2..))]
        points: u32,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct BankArgs {
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(2..=64))]
    bands: u32,
    /// Prototype length; defaults to 8 x bands.
    #[arg(long)]
    taps: Option<usize>,
    #[arg(long, default_value_t = 100.0)]
    attenuation: f64,
    /// Load a previously designed bank instead of designing one.
    #[arg(long, conflicts_with_all = ["bands", "taps", "attenuation"])]
    bank: Option<PathBuf>,
}

impl BankArgs {
    pub fn build(&self) -> Result<PqmfBank, CliError> {
        if let Some(path) = &self.bank {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let doc: BankDocument =
                serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            return Ok(PqmfBank::from_document(&doc)?);
        }
        let m = self.bands as usize;
        let taps = self.taps.unwrap_or(8 * m);
        if taps <= m || taps % m != 0 {
            return Err(CliError::Usage(format!("--taps must be a multiple of --bands larger than it, got {taps}")));
        }
        Ok(PqmfBank::design(m, taps, self.attenuation)?)
    }
}

pub fn run(cmd: PqmfCommand) -> Result<Output, CliError> {
    match cmd {
        PqmfCommand::Design { bank, out } => {
            let b = bank.build()?;
            let doc = b.to_document();
            let text = serde_json::to_string_pretty(&doc).expect("serializable bank");
            let summary = json!({
                "bands": b.num_bands(),
                "taps": b.taps(),
                "cutoff": b.cutoff(),
                "certified_snr_db": b.certified_snr_db(),
            });
            match out {
                Some(path) => {
                    std::fs::write(&path, &text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                    let mut j = summary;
                    j["path"] = json!(path);
                    let human = format!(
                        "{}-band bank, {} taps, cutoff {:.6}, certified {:.1} dB -> {}\n",
                        b.num_bands(),
                        b.taps(),
                        b.cutoff(),
                        b.certified_snr_db(),
                        path.display()
                    );
                    Ok(Output::new(j, human))
                }
                None => Ok(Output::new(serde_json::to_value(&doc).expect("serializable bank"), text + "\n")),
            }
        }
        PqmfCommand::Roundtrip { bank, input, out } => {
            let b = bank.build()?;
            let x = read(&input)?;
            let m = b.num_bands();
            let usable = x.len() - x.len() % m;
            if usable < x.len() {
                log::warn!("dropping {} trailing samples to reach a multiple of {m}", x.len() - usable);
            }
            let x = x.truncated(usable);
            let y = b.synthesize(&b.analyze(&x)?)?;
            let snr = reconstruction_snr_db(x.samples(), y.samples(), b.taps());
            if let Some(path) = &out {
                eben_core::signal::write_wav(&y, path, eben_core::signal::WavEncoding::Float32)?;
            }
            Ok(Output::new(
                json!({ "snr_db": snr, "samples": x.len(), "edge_excluded": b.taps(), "bands": m }),
                format!("round-trip SNR {snr:.2} dB over {} samples ({} excluded at each edge)\n", x.len(), b.taps()),
            ))
        }
        PqmfCommand::Response { bank, band, points, out } => {
            let b = bank.build()?;
            if band >= b.num_bands() {
                return Err(CliError::Usage(format!("--band {band} out of range for {} bands", b.num_bands())));
            }
            let resp = b.band_frequency_response(band, points as usize)?;
            let rows = || resp.iter().map(|(f, m)| format!("{},{}", fmt_f(*f), fmt_f(*m)));
            let j = json!({
                "band": band,
                "frequency": resp.iter().map(|r| r.0).collect::<Vec<_>>(),
                "magnitude_db": resp.iter().map(|r| r.1).collect::<Vec<_>>(),
            });
            match out {
                Some(path) => {
                    write_csv(&path, "frequency,magnitude_db", rows())?;
                    Ok(Output::new(
                        json!({ "band": band, "points": resp.len(), "path": path }),
                        format!("{} rows -> {}\n", resp.len(), path.display()),
                    ))
                }
                None => {
                    let mut text = String::from("frequency,magnitude_db\n");
                    for r in rows() {
                        text.push_str(&r);
                        text.push('\n');
                    }
                    Ok(Output::new(j, text))
                }
            }
        }
    }
}
