//! Simulated in-ear capture: a second-order lowpass applied forward and
//! backward (zero phase), plus white Gaussian noise at a fixed SNR.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::rng::Xoshiro;
use crate::signal::Signal;

/// Edge extension used by [`filtfilt`]: three times the number of filter
/// coefficients of a biquad.
pub const FILTFILT_PAD: usize = 9;

/// Second-order section with `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Bilinear-transform lowpass (the audio-EQ cookbook form):
    /// `ω0 = 2π fc / fs`, `α = sin ω0 / (2Q)`, unit gain at DC.
    pub fn lowpass(cutoff_hz: f64, q_factor: f64, sample_rate_hz: u32) -> Result<Self> {
        let fs = f64::from(sample_rate_hz);
        if !(cutoff_hz > 0.0 && cutoff_hz < fs / 2.0) {
            return arg(format!("cutoff {cutoff_hz} Hz outside (0, {}) Hz", fs / 2.0));
        }
        if !(q_factor > 0.0 && q_factor.is_finite()) {
            return arg(format!("Q factor {q_factor} must be positive"));
        }
        let w0 = 2.0 * std::f64::consts::PI * cutoff_hz / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q_factor);
        let a0 = 1.0 + alpha;
        Ok(Self {
            b0: (1.0 - cos) / 2.0 / a0,
            b1: (1.0 - cos) / a0,
            b2: (1.0 - cos) / 2.0 / a0,
            a1: -2.0 * cos / a0,
            a2: (1.0 - alpha) / a0,
        })
    }

    /// Largest pole modulus; below 1 for a stable section.
    pub fn pole_radius(&self) -> f64 {
        // roots of z^2 + a1 z + a2
        let disc = self.a1 * self.a1 - 4.0 * self.a2;
        if disc >= 0.0 {
            let r = disc.sqrt();
            ((-self.a1 + r) / 2.0).abs().max(((-self.a1 - r) / 2.0).abs())
        } else {
            self.a2.abs().sqrt()
        }
    }

    pub fn is_stable(&self) -> bool {
        self.pole_radius() < 1.0
    }

    /// `|H(e^{jω})|` at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, sample_rate_hz: u32) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / f64::from(sample_rate_hz);
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num_re = self.b0 + self.b1 * c1 + self.b2 * c2;
        let num_im = self.b1 * s1 + self.b2 * s2;
        let den_re = 1.0 + self.a1 * c1 + self.a2 * c2;
        let den_im = self.a1 * s1 + self.a2 * s2;
        num_re.hypot(num_im) / den_re.hypot(den_im)
    }

    /// Transposed direct-form-II state that a unit step settles into.
    fn step_state(&self) -> [f64; 2] {
        let g = (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2);
        let z2 = self.b2 - self.a2 * g;
        [self.b1 - self.a1 * g + z2, z2]
    }

    /// Runs the section over `x` starting from `state`.
    pub fn filter_with_state(&self, x: &[f64], mut state: [f64; 2]) -> Vec<f64> {
        x.iter()
            .map(|&v| {
                let y = self.b0 * v + state[0];
                state[0] = self.b1 * v - self.a1 * y + state[1];
                state[1] = self.b2 * v - self.a2 * y;
                y
            })
            .collect()
    }

    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        self.filter_with_state(x, [0.0, 0.0])
    }
}

/// Zero-phase forward-backward filtering.
///
/// The input is extended by [`FILTFILT_PAD`] samples of odd reflection at
/// each end, filtered forward from the steady state scaled by the first
/// extended sample, reversed, filtered again the same way, reversed, and
/// trimmed back to the input length. The input must be longer than
/// `3 * FILTFILT_PAD` samples.
pub fn filtfilt(biquad: &Biquad, signal: &Signal) -> Result<Signal> {
    let x = signal.samples();
    let n = x.len();
    if n <= 3 * FILTFILT_PAD {
        return arg(format!("filtfilt needs more than {} samples, got {n}", 3 * FILTFILT_PAD));
    }
    let pad = FILTFILT_PAD;
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|k| 2.0 * x[0] - x[k]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|k| 2.0 * x[n - 1] - x[n - 1 - k]));

    let zi = biquad.step_state();
    let scaled = |s: f64| [zi[0] * s, zi[1] * s];

    let mut fwd = biquad.filter_with_state(&ext, scaled(ext[0]));
    fwd.reverse();
    let mut back = biquad.filter_with_state(&fwd, scaled(fwd[0]));
    back.reverse();
    Signal::new(back[pad..pad + n].to_vec(), signal.sample_rate_hz())
}

/// Which power the noise level is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseReference {
    /// The lowpassed signal the noise is added to.
    #[default]
    Filtered,
    /// The clean input.
    Clean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationConfig {
    pub cutoff_hz: f64,
    pub q_factor: f64,
    pub noise_snr_db: f64,
    pub seed: u64,
    #[serde(default)]
    pub noise_reference: NoiseReference,
}

impl Default for DegradationConfig {
    fn default() -> Self {
        Self { cutoff_hz: 600.0, q_factor: 1.0, noise_snr_db: 23.0, seed: 0, noise_reference: NoiseReference::Filtered }
    }
}

impl DegradationConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn biquad(&self, sample_rate_hz: u32) -> Result<Biquad> {
        Biquad::lowpass(self.cutoff_hz, self.q_factor, sample_rate_hz)
    }
}

/// The pieces of a degradation, kept apart for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct Degradation {
    pub filtered: Signal,
    pub noise: Vec<f64>,
    pub output: Signal,
}

impl Degradation {
    /// Measured ratio of filtered-signal power to added-noise power.
    pub fn measured_snr_db(&self) -> f64 {
        let pn = self.noise.iter().map(|v| v * v).sum::<f64>();
        let ps = self.filtered.energy();
        if pn == 0.0 {
            return f64::INFINITY;
        }
        10.0 * (ps / pn).log10()
    }
}

/// Applies the lowpass with [`filtfilt`] and adds seeded white Gaussian noise
/// whose variance is the reference power times `10^(-snr/10)`.
pub fn degrade_detailed(signal: &Signal, config: &DegradationConfig) -> Result<Degradation> {
    if signal.is_empty() {
        return arg("cannot degrade an empty signal");
    }
    let biquad = config.biquad(signal.sample_rate_hz())?;
    let filtered = filtfilt(&biquad, signal)?;
    let reference_power = match config.noise_reference {
        NoiseReference::Filtered => filtered.power(),
        NoiseReference::Clean => signal.power(),
    };
    let sigma = (reference_power * 10f64.powf(-config.noise_snr_db / 10.0)).sqrt();
    let mut rng = Xoshiro::seed_from_u64(config.seed);
    let noise: Vec<f64> = (0..signal.len()).map(|_| sigma * rng.gaussian()).collect();
    let output =
        Signal::new(filtered.samples().iter().zip(&noise).map(|(s, n)| s + n).collect(), signal.sample_rate_hz())?;
    Ok(Degradation { filtered, noise, output })
}

pub fn degrade(signal: &Signal, config: &DegradationConfig) -> Result<Signal> {
    degrade_detailed(signal, config).map(|d| d.output)
}

/// Composite (forward-backward) magnitude response `20 log10 |H|^2` in dB at
/// `n_points` frequencies spanning `[0, fs/2]`.
pub fn degradation_response(
    config: &DegradationConfig,
    sample_rate_hz: u32,
    n_points: usize,
) -> Result<Vec<(f64, f64)>> {
    if n_points < 2 {
        return arg("need at least 2 frequency points");
    }
    let bq = config.biquad(sample_rate_hz)?;
    let nyq = f64::from(sample_rate_hz) / 2.0;
    Ok((0..n_points)
        .map(|k| {
            let f = nyq * k as f64 / (n_points - 1) as f64;
            let mag = bq.magnitude(f, sample_rate_hz);
            (f, 40.0 * mag.max(1e-300).log10())
        })
        .collect())
}
