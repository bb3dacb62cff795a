//! Multi-scale discriminator ensemble.
//!
//! Scale 0 sees the full-rate waveform; scales 1..=3 each see one upper
//! PQMF band. Every scale is a MelGAN-style stack of grouped strided
//! convolutions with leaky-ReLU activations after all but the last layer.

use crate::error::{arg, Error, Result};
use crate::pqmf::Subbands;
use crate::signal::Signal;
use crate::tensor::{conv1d, ConvSpec, Tensor};

use super::config::{DiscriminatorConfig, GeneratorConfig, NUM_SCALES};
use super::generator::split_bands_tensor;
use super::weights::{ParamSpec, WeightStore};

pub const PREFIX: &str = "discriminator";

fn layer_name(scale: usize, layer: usize) -> String {
    format!("{PREFIX}{scale}.layer{layer}")
}

/// Parameter names and shapes for all scales.
pub fn parameter_specs(config: &DiscriminatorConfig) -> Vec<ParamSpec> {
    (0..config.num_scales)
        .flat_map(|k| {
            config
                .layer_plan(k)
                .into_iter()
                .enumerate()
                .flat_map(move |(l, spec)| ParamSpec::conv(&layer_name(k, l), &spec, false))
        })
        .collect()
}

/// Logits and every layer's activations of one scale.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorOutput {
    /// `[1, T_{k,L_k}]`.
    pub logits: Tensor,
    /// `[F_{k,l}, T_{k,l}]` for each of the `L_k` layers; the last entry is
    /// the logits.
    pub features: Vec<Tensor>,
}

impl DiscriminatorOutput {
    pub fn num_layers(&self) -> usize {
        self.features.len()
    }
}

#[derive(Debug, Clone)]
struct Layer {
    spec: ConvSpec,
    weight: Tensor,
    bias: Tensor,
}

/// One scale with resolved weights.
#[derive(Debug, Clone)]
pub struct Discriminator {
    scale: usize,
    slope: f64,
    layers: Vec<Layer>,
}

impl Discriminator {
    pub fn new(config: &DiscriminatorConfig, weights: &WeightStore, scale: usize) -> Result<Self> {
        config.validate()?;
        if scale >= config.num_scales {
            return arg(format!("scale index {scale} out of range 0..{}", config.num_scales));
        }
        let layers = config
            .layer_plan(scale)
            .into_iter()
            .enumerate()
            .map(|(l, spec)| {
                let [w, b] = ParamSpec::conv(&layer_name(scale, l), &spec, false);
                Ok(Layer { spec, weight: weights.fetch(&w.name, &w.shape)?, bias: weights.fetch(&b.name, &b.shape)? })
            })
            .collect::<Result<_>>()?;
        Ok(Self { scale, slope: config.leaky_slope, layers })
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    /// Runs the stack on a single-channel `[1, T]` input.
    pub fn forward(&self, input: &Tensor) -> Result<DiscriminatorOutput> {
        if input.rank() != 2 || input.shape()[0] != 1 {
            return Err(Error::Shape(format!("discriminator input must be [1, T], got {:?}", input.shape())));
        }
        let mut features = Vec::with_capacity(self.layers.len());
        let mut h = input.clone();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            h = conv1d(&h, &layer.weight, &layer.bias, &layer.spec)?;
            if l != last {
                let a = self.slope;
                h = h.map(|v| if v >= 0.0 { v } else { a * v });
            }
            features.push(h.clone());
        }
        Ok(DiscriminatorOutput { logits: h, features })
    }

    pub fn forward_signal(&self, signal: &[f64]) -> Result<DiscriminatorOutput> {
        self.forward(&Tensor::new(vec![1, signal.len()], signal.to_vec())?)
    }
}

/// All four scales.
#[derive(Debug, Clone)]
pub struct Ensemble {
    scales: Vec<Discriminator>,
}

/// Which input each scale received: `None` for the full-rate signal,
/// `Some(i)` for PQMF band `i`.
pub type Routing = [Option<usize>; NUM_SCALES];

impl Ensemble {
    pub fn new(config: &DiscriminatorConfig, weights: &WeightStore) -> Result<Self> {
        let scales = (0..config.num_scales).map(|k| Discriminator::new(config, weights, k)).collect::<Result<_>>()?;
        Ok(Self { scales })
    }

    pub fn scale(&self, k: usize) -> Option<&Discriminator> {
        self.scales.get(k)
    }

    /// Scale 0 on `full`, scales 1..=3 on the upper bands of `subbands`.
    pub fn forward(
        &self,
        full: &Signal,
        subbands: &Subbands,
        generator: &GeneratorConfig,
    ) -> Result<(Vec<DiscriminatorOutput>, Routing)> {
        let (_, upper, routing) = route(subbands, generator)?;
        let mut out = vec![self.scales[0].forward_signal(full.samples())?];
        for k in 1..NUM_SCALES {
            out.push(self.scales[k].forward_signal(upper.row(k - 1))?);
        }
        Ok((out, routing))
    }
}

/// Partitions bands into the generator input and the discriminator inputs.
///
/// The lowest `bands_to_generator` bands go to the generator; the remaining
/// ones, in ascending frequency order, to scales 1..=3.
pub fn split_bands(subbands: &Subbands, config: &GeneratorConfig) -> Result<(Tensor, Tensor)> {
    route(subbands, config).map(|(g, d, _)| (g, d))
}

fn route(subbands: &Subbands, config: &GeneratorConfig) -> Result<(Tensor, Tensor, Routing)> {
    let m = subbands.num_bands();
    if m != config.num_bands {
        return Err(Error::Config(format!("{m} subbands for a {}-band configuration", config.num_bands)));
    }
    let upper = m.saturating_sub(config.bands_to_generator);
    if upper != NUM_SCALES - 1 {
        return Err(Error::Config(format!("{upper} upper bands for {} subband discriminators", NUM_SCALES - 1)));
    }
    let (g, d) = split_bands_tensor(subbands.bands(), config.bands_to_generator)?;
    let mut routing = [None; NUM_SCALES];
    for (k, r) in routing.iter_mut().enumerate().skip(1) {
        *r = Some(config.bands_to_generator + k - 1);
    }
    Ok((g, d, routing))
}

/// Runs scale `k` of the ensemble defined by `weights`.
pub fn discriminator_forward(
    weights: &WeightStore,
    config: &DiscriminatorConfig,
    input: &Tensor,
    k: usize,
) -> Result<DiscriminatorOutput> {
    Discriminator::new(config, weights, k)?.forward(input)
}
