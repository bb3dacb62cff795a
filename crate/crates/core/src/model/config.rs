use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::ConvSpec;

/// Number of discriminator scales: one full-rate, three on PQMF bands.
pub const NUM_SCALES: usize = 4;

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

/// U-Net generator hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub num_bands: usize,
    /// Lowest bands fed to the generator; the rest go to the discriminators.
    pub bands_to_generator: usize,
    pub encoder_strides: Vec<usize>,
    pub base_channels: usize,
    pub residual_dilations: Vec<usize>,
    pub latent_channels: usize,
    /// Kernel of the input, bottleneck and output convolutions.
    pub kernel_size: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            num_bands: 4,
            bands_to_generator: 1,
            encoder_strides: vec![2, 4, 8],
            base_channels: 32,
            residual_dilations: vec![1, 3, 9],
            latent_channels: 128,
            kernel_size: 7,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_bands < 2 {
            return config_err(format!("num_bands must be >= 2, got {}", self.num_bands));
        }
        if self.bands_to_generator < 1 || self.bands_to_generator >= self.num_bands {
            return config_err(format!(
                "bands_to_generator must lie in [1, {}), got {}",
                self.num_bands, self.bands_to_generator
            ));
        }
        if let Some(s) = self.encoder_strides.iter().find(|&&s| s < 2) {
            return config_err(format!("encoder strides must be >= 2, got {s}"));
        }
        if self.residual_dilations.contains(&0) {
            return config_err("residual dilations must be >= 1");
        }
        if self.base_channels == 0 || self.latent_channels == 0 {
            return config_err("channel counts must be positive");
        }
        if self.kernel_size % 2 == 0 {
            return config_err(format!("kernel_size must be odd, got {}", self.kernel_size));
        }
        Ok(())
    }

    pub fn total_stride(&self) -> usize {
        self.encoder_strides.iter().product()
    }

    /// Input lengths must be a multiple of this.
    pub fn length_multiple(&self) -> usize {
        self.num_bands * self.total_stride()
    }

    /// Channels entering encoder stage `i` (and leaving decoder stage `i`).
    pub fn stage_channels(&self, i: usize) -> usize {
        self.base_channels << i
    }

    pub fn deepest_channels(&self) -> usize {
        self.stage_channels(self.encoder_strides.len())
    }
}

/// Strided down-sampling convolution for stride `s`: kernel `2s`, output
/// length exactly `L / s`.
pub(crate) fn down_spec(c_in: usize, c_out: usize, s: usize) -> ConvSpec {
    ConvSpec::new(c_in, c_out, 2 * s).stride(s).padding(s.div_ceil(2), s / 2)
}

/// Transposed counterpart of [`down_spec`]: output length exactly `L * s`.
pub(crate) fn up_spec(c_in: usize, c_out: usize, s: usize) -> ConvSpec {
    ConvSpec::new(c_in, c_out, 2 * s).stride(s).padding(s.div_ceil(2), s / 2)
}

/// MelGAN-style discriminator stack shared by all scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorConfig {
    pub num_scales: usize,
    pub first_channels: usize,
    pub first_kernel: usize,
    pub stage_kernel: usize,
    pub stage_stride: usize,
    pub stage_groups: usize,
    pub channel_multiplier: usize,
    pub max_channels: usize,
    /// Strided stages of the full-rate discriminator.
    pub full_scale_stages: usize,
    /// Strided stages of each band discriminator.
    pub band_stages: usize,
    pub post_kernel: usize,
    pub output_kernel: usize,
    pub leaky_slope: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            num_scales: NUM_SCALES,
            first_channels: 16,
            first_kernel: 15,
            stage_kernel: 41,
            stage_stride: 4,
            stage_groups: 4,
            channel_multiplier: 4,
            max_channels: 1024,
            full_scale_stages: 4,
            band_stages: 3,
            post_kernel: 5,
            output_kernel: 3,
            leaky_slope: 0.2,
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_scales != NUM_SCALES {
            return config_err(format!("num_scales is fixed at {NUM_SCALES}, got {}", self.num_scales));
        }
        for (name, k) in [
            ("first_kernel", self.first_kernel),
            ("stage_kernel", self.stage_kernel),
            ("post_kernel", self.post_kernel),
            ("output_kernel", self.output_kernel),
        ] {
            if k % 2 == 0 {
                return config_err(format!("{name} must be odd, got {k}"));
            }
        }
        if self.first_channels == 0 || self.stage_stride == 0 || self.stage_groups == 0 || self.channel_multiplier == 0
        {
            return config_err("channel counts, stride and groups must be positive");
        }
        if !(self.leaky_slope.is_finite()) {
            return config_err("leaky_slope must be finite");
        }
        for k in 0..NUM_SCALES {
            for spec in self.layer_plan(k) {
                spec.validate().map_err(|e| Error::Config(format!("scale {k}: {e}")))?;
            }
        }
        Ok(())
    }

    pub fn stages(&self, scale: usize) -> usize {
        if scale == 0 {
            self.full_scale_stages
        } else {
            self.band_stages
        }
    }

    /// Number of layers `L_k` of scale `k`, logits included.
    pub fn num_layers(&self, scale: usize) -> usize {
        self.stages(scale) + 3
    }

    /// Convolution geometry of every layer of scale `k`, in order.
    pub fn layer_plan(&self, scale: usize) -> Vec<ConvSpec> {
        let mut plan = vec![ConvSpec::new(1, self.first_channels, self.first_kernel).same()];
        let mut c = self.first_channels;
        for _ in 0..self.stages(scale) {
            let out = (c * self.channel_multiplier).min(self.max_channels);
            plan.push(
                ConvSpec::new(c, out, self.stage_kernel)
                    .stride(self.stage_stride)
                    .groups(self.stage_groups)
                    .padding(self.stage_kernel / 2, self.stage_kernel / 2),
            );
            c = out;
        }
        plan.push(ConvSpec::new(c, c, self.post_kernel).same());
        plan.push(ConvSpec::new(c, 1, self.output_kernel).same());
        plan
    }
}
