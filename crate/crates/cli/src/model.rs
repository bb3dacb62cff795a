use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use eben_core::model::{
    count_config_parameters, init_weights, parameter_specs, report_latency, DiscriminatorConfig, Ensemble, Generator,
    GeneratorConfig, LossBreakdown, WeightStore, DEFAULT_LAMBDA,
};
use eben_core::pqmf::PqmfBank;
use eben_core::signal::{write_wav, Signal, WavEncoding};
use serde::Deserialize;
use serde_json::json;

use crate::output::{read, CliError, Output};

#[derive(Debug, Subcommand)]
pub enum ModelCommand {
    /// Parameter counts and the latency report.
    Info(ConfigArg),
    /// Write a weights file: seeded uniform initialization or all zeros.
    Init {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        zeros: bool,
    },
    /// Run the generator on a degraded recording.
    Enhance {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Discriminator and generator losses for one (reference, degraded) pair.
    Losses {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        degraded: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: f64,
    },
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// JSON with optional `generator` and `discriminator` objects.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ModelConfig {
    generator: GeneratorConfig,
    discriminator: DiscriminatorConfig,
}

impl ConfigArg {
    fn load(&self) -> Result<ModelConfig, CliError> {
        let cfg: ModelConfig = match &self.config {
            None => ModelConfig::default(),
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
            }
        };
        cfg.generator.validate()?;
        cfg.discriminator.validate()?;
        Ok(cfg)
    }
}

fn load_weights(path: &Path) -> Result<WeightStore, CliError> {
    WeightStore::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Generator output for `x`, zero-padded to the length multiple and trimmed
/// back, rounded to the float32 resolution `enhance` writes.
fn enhance_signal(
    cfg: &GeneratorConfig,
    weights: &WeightStore,
    bank: &PqmfBank,
    x: &Signal,
) -> Result<Signal, CliError> {
    let gen = Generator::new(cfg, weights)?;
    let multiple = cfg.length_multiple();
    let padded_len = x.len().div_ceil(multiple) * multiple;
    let mut padded = x.samples().to_vec();
    padded.resize(padded_len, 0.0);
    let y = gen.forward(&Signal::new(padded, x.sample_rate_hz())?, bank)?;
    let trimmed = y.samples()[..x.len()].iter().map(|&v| f64::from(v as f32)).collect();
    Ok(Signal::new(trimmed, x.sample_rate_hz())?)
}

fn pad_to(x: &Signal, multiple: usize) -> Result<Signal, CliError> {
    let mut s = x.samples().to_vec();
    s.resize(x.len().div_ceil(multiple) * multiple, 0.0);
    Ok(Signal::new(s, x.sample_rate_hz())?)
}

pub fn run(cmd: ModelCommand) -> Result<Output, CliError> {
    match cmd {
        ModelCommand::Info(c) => {
            let cfg = c.load()?;
            let counts = count_config_parameters(&cfg.generator, &cfg.discriminator);
            let bank = PqmfBank::design_default(cfg.generator.num_bands)?;
            let latency = report_latency(&cfg.generator, &bank, 16_000)?;
            let text = format!(
                "generator      {:>12}\ndiscriminators {:>12} ({})\ntotal          {:>12}\nlookahead      {:>12} samples ({:.2} ms at 16 kHz, within budget: {})\nreceptive field {:>11} samples\nlength multiple {:>11}\n",
                counts.generator,
                counts.discriminator_total,
                counts.discriminators.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "),
                counts.total,
                latency.lookahead_samples,
                latency.lookahead_ms,
                latency.within_budget,
                latency.receptive_field_samples,
                cfg.generator.length_multiple(),
            );
            Ok(Output::new(
                json!({
                    "parameters": counts,
                    "latency": latency,
                    "length_multiple": cfg.generator.length_multiple(),
                    "generator": cfg.generator,
                    "discriminator": cfg.discriminator,
                }),
                text,
            ))
        }
        ModelCommand::Init { config, out, seed, zeros } => {
            let cfg = config.load()?;
            let store = if zeros {
                WeightStore::zeros(&parameter_specs(&cfg.generator, &cfg.discriminator))?
            } else {
                init_weights(&cfg.generator, &cfg.discriminator, seed)?
            };
            store.save(&out)?;
            Ok(Output::new(
                json!({ "path": out, "tensors": store.len(), "parameters": store.parameter_count(), "zeros": zeros, "seed": seed }),
                format!("{} tensors, {} parameters -> {}\n", store.len(), store.parameter_count(), out.display()),
            ))
        }
        ModelCommand::Enhance { config, weights, input, out } => {
            let cfg = config.load()?;
            let w = load_weights(&weights)?;
            let bank = PqmfBank::design_default(cfg.generator.num_bands)?;
            let x = read(&input)?;
            if x.is_empty() {
                return Err(CliError::Data(format!("{}: no samples", input.display())));
            }
            let y = enhance_signal(&cfg.generator, &w, &bank, &x)?;
            write_wav(&y, &out, WavEncoding::Float32)?;
            Ok(Output::new(
                json!({ "input": input, "output": out, "samples": y.len() }),
                format!("{} -> {} ({} samples)\n", input.display(), out.display(), y.len()),
            ))
        }
        ModelCommand::Losses { config, weights, reference, degraded, lambda } => {
            let cfg = config.load()?;
            let w = load_weights(&weights)?;
            let bank = PqmfBank::design_default(cfg.generator.num_bands)?;
            let y = read(&reference)?;
            let x = read(&degraded)?;
            if x.len() != y.len() || x.is_empty() {
                return Err(CliError::Data(format!("length mismatch: {} vs {} samples", y.len(), x.len())));
            }
            let fake = enhance_signal(&cfg.generator, &w, &bank, &x)?;
            let m = bank.num_bands();
            let (real, fake) = (pad_to(&y, m)?, pad_to(&fake, m)?);
            let ens = Ensemble::new(&cfg.discriminator, &w)?;
            let (real_out, _) = ens.forward(&real, &bank.analyze(&real)?, &cfg.generator)?;
            let (fake_out, routing) = ens.forward(&fake, &bank.analyze(&fake)?, &cfg.generator)?;
            let b = LossBreakdown::compute(&real_out, &fake_out, lambda)?;
            let mut j = serde_json::to_value(b).expect("serializable losses");
            j["routing"] = json!(routing);
            Ok(Output::new(
                j,
                format!(
                    "L_D {:.6}\nL_G adv {:.6}\nL_G rec {:.6}\nL_G {:.6} (lambda {})\n",
                    b.l_d, b.l_g_adv, b.l_g_rec, b.l_g, b.lambda
                ),
            ))
        }
    }
}
