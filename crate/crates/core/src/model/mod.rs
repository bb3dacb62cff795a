//! The EBEN generator and discriminator forward passes, their losses,
//! weight storage, parameter counts and latency. There is no training loop:
//! weights come from a file or from seeded initialization.

mod config;
mod discriminator;
mod generator;
mod latency;
mod loss;
mod weights;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use config::{DiscriminatorConfig, GeneratorConfig, NUM_SCALES};
pub use discriminator::{discriminator_forward, split_bands, Discriminator, DiscriminatorOutput, Ensemble, Routing};
pub use generator::{generator_forward, Generator};
pub use latency::{chain_latency, report_latency, ChainLayer, LatencyReport, Span, BUDGET_MS};
pub use loss::{
    loss_discriminator, loss_generator_adv, loss_generator_rec, loss_generator_total, LossBreakdown, DEFAULT_LAMBDA,
};
pub use weights::{ParamSpec, WeightStore, MAGIC, VERSION};

pub fn generator_parameter_specs(config: &GeneratorConfig) -> Vec<ParamSpec> {
    generator::parameter_specs(config)
}

pub fn discriminator_parameter_specs(config: &DiscriminatorConfig) -> Vec<ParamSpec> {
    discriminator::parameter_specs(config)
}

/// Generator followed by all discriminator scales.
pub fn parameter_specs(generator: &GeneratorConfig, discriminator: &DiscriminatorConfig) -> Vec<ParamSpec> {
    let mut specs = generator_parameter_specs(generator);
    specs.extend(discriminator_parameter_specs(discriminator));
    specs
}

/// Seeded weights for both networks.
pub fn init_weights(
    generator: &GeneratorConfig,
    discriminator: &DiscriminatorConfig,
    seed: u64,
) -> Result<WeightStore> {
    generator.validate()?;
    discriminator.validate()?;
    WeightStore::seeded(&parameter_specs(generator, discriminator), seed)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterCount {
    pub generator: usize,
    /// One entry per scale.
    pub discriminators: Vec<usize>,
    pub discriminator_total: usize,
    pub total: usize,
}

fn count(specs: &[ParamSpec], prefix: &str) -> usize {
    specs.iter().filter(|s| s.name.starts_with(prefix)).map(ParamSpec::len).sum()
}

/// Weights plus biases per component, from a parameter layout.
pub fn count_parameters(specs: &[ParamSpec]) -> ParameterCount {
    let generator = count(specs, generator::PREFIX);
    let discriminators: Vec<usize> =
        (0..NUM_SCALES).map(|k| count(specs, &format!("{}{k}.", discriminator::PREFIX))).collect();
    let discriminator_total = discriminators.iter().sum();
    ParameterCount { generator, discriminators, discriminator_total, total: generator + discriminator_total }
}

/// [`count_parameters`] for the layout implied by two configs.
pub fn count_config_parameters(generator: &GeneratorConfig, discriminator: &DiscriminatorConfig) -> ParameterCount {
    count_parameters(&parameter_specs(generator, discriminator))
}

/// [`count_parameters`] for the tensors actually present in a store.
pub fn count_store_parameters(store: &WeightStore) -> ParameterCount {
    let specs: Vec<ParamSpec> =
        store.iter().map(|(n, t)| ParamSpec { name: n.to_string(), shape: t.shape().to_vec(), fan_in: 0 }).collect();
    count_parameters(&specs)
}
