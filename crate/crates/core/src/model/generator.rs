//! PQMF-wrapped U-Net generator.
//!
//! The degraded signal is split by the analysis bank; the lowest band(s)
//! go through a convolutional encoder/decoder whose output has one channel
//! per band, and the synthesis bank recombines those into a full-band
//! signal of the input length.

use crate::error::{arg, Error, Result};
use crate::pqmf::{PqmfBank, Subbands};
use crate::signal::Signal;
use crate::tensor::{conv1d, conv1d_transposed, ConvSpec, Tensor};

use super::config::{down_spec, up_spec, GeneratorConfig};
use super::weights::{ParamSpec, WeightStore};

pub const PREFIX: &str = "generator";

pub(crate) fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    t.map(f)
}

fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("cannot add {:?} and {:?}", a.shape(), b.shape())));
    }
    Tensor::new(a.shape().to_vec(), a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect())
}

/// One convolution with its parameters.
#[derive(Debug, Clone)]
pub(crate) struct Conv {
    pub spec: ConvSpec,
    pub transposed: bool,
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Conv {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if self.transposed {
            conv1d_transposed(x, &self.weight, &self.bias, &self.spec)
        } else {
            conv1d(x, &self.weight, &self.bias, &self.spec)
        }
    }
}

/// Named convolution slots of the generator, in declaration order.
pub(crate) fn layer_plan(config: &GeneratorConfig) -> Vec<(String, ConvSpec, bool)> {
    let k = config.kernel_size;
    let mut plan = vec![(
        format!("{PREFIX}.input"),
        ConvSpec::new(config.bands_to_generator, config.base_channels, k).same(),
        false,
    )];
    let res = |plan: &mut Vec<_>, prefix: String, c: usize| {
        for (j, &d) in config.residual_dilations.iter().enumerate() {
            plan.push((format!("{prefix}.res{j}.dilated"), ConvSpec::new(c, c, 3).dilation(d).same(), false));
            plan.push((format!("{prefix}.res{j}.pointwise"), ConvSpec::new(c, c, 1), false));
        }
    };
    for (i, &s) in config.encoder_strides.iter().enumerate() {
        let c = config.stage_channels(i);
        res(&mut plan, format!("{PREFIX}.encoder{i}"), c);
        plan.push((format!("{PREFIX}.encoder{i}.down"), down_spec(c, 2 * c, s), false));
    }
    let deep = config.deepest_channels();
    plan.push((format!("{PREFIX}.bottleneck.in"), ConvSpec::new(deep, config.latent_channels, k).same(), false));
    plan.push((format!("{PREFIX}.bottleneck.out"), ConvSpec::new(config.latent_channels, deep, k).same(), false));
    for (i, &s) in config.encoder_strides.iter().enumerate().rev() {
        let c = config.stage_channels(i);
        plan.push((format!("{PREFIX}.decoder{i}.up"), up_spec(2 * c, c, s), true));
        res(&mut plan, format!("{PREFIX}.decoder{i}"), c);
    }
    plan.push((format!("{PREFIX}.output"), ConvSpec::new(config.base_channels, config.num_bands, k).same(), false));
    plan
}

/// Parameter names and shapes for `config`.
pub fn parameter_specs(config: &GeneratorConfig) -> Vec<ParamSpec> {
    layer_plan(config).iter().flat_map(|(name, spec, t)| ParamSpec::conv(name, spec, *t)).collect()
}

#[derive(Debug, Clone)]
struct Residual {
    dilated: Conv,
    pointwise: Conv,
}

impl Residual {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let h = self.dilated.forward(&map(x, elu))?;
        let h = self.pointwise.forward(&map(&h, elu))?;
        add(x, &h)
    }
}

fn residual_chain(units: &[Residual], x: Tensor) -> Result<Tensor> {
    units.iter().try_fold(x, |h, u| u.forward(&h))
}

/// Generator with weights resolved and converted to f64.
#[derive(Debug, Clone)]
pub struct Generator {
    config: GeneratorConfig,
    input: Conv,
    encoder: Vec<(Vec<Residual>, Conv)>,
    bottleneck: (Conv, Conv),
    decoder: Vec<(Conv, Vec<Residual>)>,
    output: Conv,
}

impl Generator {
    pub fn new(config: &GeneratorConfig, weights: &WeightStore) -> Result<Self> {
        config.validate()?;
        let mut convs = std::collections::HashMap::new();
        for (name, spec, transposed) in layer_plan(config) {
            let [w, b] = ParamSpec::conv(&name, &spec, transposed);
            let conv = Conv {
                spec,
                transposed,
                weight: weights.fetch(&w.name, &w.shape)?,
                bias: weights.fetch(&b.name, &b.shape)?,
            };
            convs.insert(name, conv);
        }
        let mut take = |name: String| convs.remove(&name).expect("layer_plan names are unique");
        let residuals = |take: &mut dyn FnMut(String) -> Conv, prefix: &str| {
            (0..config.residual_dilations.len())
                .map(|j| Residual {
                    dilated: take(format!("{prefix}.res{j}.dilated")),
                    pointwise: take(format!("{prefix}.res{j}.pointwise")),
                })
                .collect::<Vec<_>>()
        };
        let input = take(format!("{PREFIX}.input"));
        let encoder = (0..config.encoder_strides.len())
            .map(|i| {
                let r = residuals(&mut take, &format!("{PREFIX}.encoder{i}"));
                (r, take(format!("{PREFIX}.encoder{i}.down")))
            })
            .collect();
        let bottleneck = (take(format!("{PREFIX}.bottleneck.in")), take(format!("{PREFIX}.bottleneck.out")));
        let decoder = (0..config.encoder_strides.len())
            .rev()
            .map(|i| {
                let up = take(format!("{PREFIX}.decoder{i}.up"));
                (up, residuals(&mut take, &format!("{PREFIX}.decoder{i}")))
            })
            .collect();
        let output = take(format!("{PREFIX}.output"));
        Ok(Self { config: config.clone(), input, encoder, bottleneck, decoder, output })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    /// Maps `[bands_to_generator, L]` to `[num_bands, L]` in (-1, 1).
    pub fn forward_bands(&self, x: &Tensor) -> Result<Tensor> {
        let cfg = &self.config;
        if x.rank() != 2 || x.shape()[0] != cfg.bands_to_generator {
            return Err(Error::Shape(format!(
                "generator expects [{}, L], got {:?}",
                cfg.bands_to_generator,
                x.shape()
            )));
        }
        let l = x.shape()[1];
        if l % cfg.total_stride() != 0 {
            return arg(format!("band length {l} is not a multiple of the total stride {}", cfg.total_stride()));
        }
        let mut h = self.input.forward(x)?;
        let mut skips = Vec::with_capacity(self.encoder.len() + 1);
        for (units, down) in &self.encoder {
            skips.push(h.clone());
            let r = residual_chain(units, h)?;
            h = down.forward(&map(&r, elu))?;
        }
        let z = self.bottleneck.0.forward(&map(&h, elu))?;
        let b = self.bottleneck.1.forward(&map(&z, elu))?;
        h = add(&b, &h)?;
        for (up, units) in &self.decoder {
            let u = up.forward(&map(&h, elu))?;
            let u = residual_chain(units, u)?;
            let skip = skips.pop().expect("one skip per stage");
            h = add(&u, &skip)?;
        }
        let y = self.output.forward(&map(&h, elu))?;
        Ok(map(&y, f64::tanh))
    }

    /// Enhances `degraded`, whose length must be a multiple of
    /// [`GeneratorConfig::length_multiple`].
    pub fn forward(&self, degraded: &Signal, bank: &PqmfBank) -> Result<Signal> {
        let cfg = &self.config;
        if bank.num_bands() != cfg.num_bands {
            return Err(Error::Config(format!(
                "bank has {} bands, generator expects {}",
                bank.num_bands(),
                cfg.num_bands
            )));
        }
        let multiple = cfg.length_multiple();
        if degraded.is_empty() || degraded.len() % multiple != 0 {
            return arg(format!("input length {} must be a positive multiple of {multiple}", degraded.len()));
        }
        let subbands = bank.analyze(degraded)?;
        let (gen_in, _) = split_bands_tensor(subbands.bands(), cfg.bands_to_generator)?;
        let out = self.forward_bands(&gen_in)?;
        let out = Subbands::new(out, degraded.sample_rate_hz(), degraded.len())?;
        bank.synthesize(&out)
    }
}

/// Splits `[M, L]` rows into the lowest `low` and the rest.
pub(crate) fn split_bands_tensor(bands: &Tensor, low: usize) -> Result<(Tensor, Tensor)> {
    let (m, l) = (bands.shape()[0], bands.shape()[1]);
    if low == 0 || low >= m {
        return Err(Error::Config(format!("cannot route {low} of {m} bands to the generator")));
    }
    let (a, b) = bands.data().split_at(low * l);
    Ok((Tensor::new(vec![low, l], a.to_vec())?, Tensor::new(vec![m - low, l], b.to_vec())?))
}

/// One-shot forward pass.
pub fn generator_forward(
    weights: &WeightStore,
    degraded: &Signal,
    config: &GeneratorConfig,
    bank: &PqmfBank,
) -> Result<Signal> {
    Generator::new(config, weights)?.forward(degraded, bank)
}
