//! Pseudo-QMF filter banks: M-band decimated analysis and synthesis.
//!
//! All `M` analysis filters `H_i` and synthesis filters `G_i` are cosine
//! modulations of one Kaiser-windowed lowpass prototype `p` of `N` taps
//! (`m = (N - 1) / 2`, `Φ_i = (-1)^i π/4`):
//!
//! ```text
//! H_i[n] = 2 p[n] cos((2i + 1) π/(2M) (n - m) + Φ_i)
//! G_i[n] = 2 p[n] cos((2i + 1) π/(2M) (n - m) - Φ_i)
//! ```
//!
//! Analysis filters the input with `H_i` (true convolution, implemented as a
//! stride-`M` cross-correlation with the reversed kernel) and keeps every
//! `M`-th sample. Synthesis is a stride-`M` transposed convolution with `G_i`,
//! summed over bands and scaled by `M`. Both stages pad by
//! `P = floor((N - M) / 2)` on the left and `N - M - P` on the right, which
//! makes the round trip length-preserving with zero delay.
//!
//! The prototype cutoff (in cycles per sample) is chosen by golden-section
//! search to minimize the round-trip error of a train of impulses covering
//! every decimation phase.

use serde::{Deserialize, Serialize};

use crate::error::{arg, shape, Error, Result};
use crate::rng::Xoshiro;
use crate::signal::Signal;
use crate::tensor::{conv1d, conv1d_transposed, ConvSpec, Tensor};
use crate::window::{kaiser, kaiser_beta};

const GOLDEN_MAX_ITERS: usize = 200;
const GOLDEN_TOL: f64 = 1e-7;
const CERTIFY_LEN: usize = 1 << 14;
const CERTIFY_SEED: u64 = 0x005e_ed0f_9a3f;
const MIN_CERTIFIED_SNR_DB: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PqmfBank {
    num_bands: usize,
    taps: usize,
    cutoff: f64,
    attenuation_db: f64,
    prototype: Vec<f64>,
    analysis: Tensor,
    synthesis: Tensor,
    certified_snr_db: f64,
}

/// Serialized form of a bank. Kernels are always re-derived from the
/// prototype on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankDocument {
    #[serde(rename = "M")]
    pub num_bands: usize,
    pub taps: usize,
    pub cutoff: f64,
    pub attenuation_db: f64,
    pub prototype: Vec<f64>,
}

/// Decimated band signals, `[M, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subbands {
    bands: Tensor,
    sample_rate_hz: u32,
    original_len: usize,
}

impl Subbands {
    pub fn new(bands: Tensor, sample_rate_hz: u32, original_len: usize) -> Result<Self> {
        if bands.rank() != 2 {
            return shape(format!("subbands must be rank 2, got {:?}", bands.shape()));
        }
        if sample_rate_hz == 0 {
            return arg("sample rate must be positive");
        }
        Ok(Self { bands, sample_rate_hz, original_len })
    }

    pub fn bands(&self) -> &Tensor {
        &self.bands
    }

    pub fn into_bands(self) -> Tensor {
        self.bands
    }

    pub fn num_bands(&self) -> usize {
        self.bands.shape()[0]
    }

    /// Samples per band.
    pub fn band_len(&self) -> usize {
        self.bands.shape()[1]
    }

    pub fn band(&self, i: usize) -> &[f64] {
        self.bands.row(i)
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    /// Length of the signal before right-padding to a multiple of `M`.
    pub fn original_len(&self) -> usize {
        self.original_len
    }

    pub fn energy(&self, i: usize) -> f64 {
        self.band(i).iter().map(|v| v * v).sum()
    }
}

fn prototype(taps: usize, cutoff: f64, beta: f64) -> Vec<f64> {
    let m = (taps - 1) as f64 / 2.0;
    let win = kaiser(taps, beta);
    let mut p: Vec<f64> = (0..taps)
        .map(|n| {
            let x = n as f64 - m;
            let arg = 2.0 * cutoff * x;
            let sinc = if arg == 0.0 { 1.0 } else { (std::f64::consts::PI * arg).sin() / (std::f64::consts::PI * arg) };
            2.0 * cutoff * sinc * win[n]
        })
        .collect();
    // exact symmetry, independent of rounding in the sinc/window evaluation
    for n in 0..taps / 2 {
        let avg = 0.5 * (p[n] + p[taps - 1 - n]);
        p[n] = avg;
        p[taps - 1 - n] = avg;
    }
    p
}

fn modulate(proto: &[f64], num_bands: usize, sign: f64) -> Tensor {
    let n_taps = proto.len();
    let m = (n_taps - 1) as f64 / 2.0;
    let mut data = Vec::with_capacity(num_bands * n_taps);
    for i in 0..num_bands {
        let phi = if i % 2 == 0 { 1.0 } else { -1.0 } * std::f64::consts::FRAC_PI_4;
        let w = (2 * i + 1) as f64 * std::f64::consts::PI / (2 * num_bands) as f64;
        data.extend(proto.iter().enumerate().map(|(n, &p)| 2.0 * p * (w * (n as f64 - m) + sign * phi).cos()));
    }
    Tensor::from_parts(vec![num_bands, n_taps], data)
}

fn check_geometry(num_bands: usize, taps: usize) -> Result<()> {
    if num_bands < 2 {
        return Err(Error::Design(format!("need at least 2 bands, got {num_bands}")));
    }
    if taps % 2 != 0 {
        return Err(Error::Design(format!("taps must be even, got {taps}")));
    }
    if taps < 4 * num_bands {
        return Err(Error::Design(format!(
            "{taps} taps cannot give {num_bands} bands enough stopband (need at least {})",
            4 * num_bands
        )));
    }
    Ok(())
}

impl PqmfBank {
    /// Builds the bank for a given prototype cutoff without optimizing.
    fn with_cutoff(num_bands: usize, taps: usize, attenuation_db: f64, cutoff: f64) -> Self {
        let proto = prototype(taps, cutoff, kaiser_beta(attenuation_db));
        Self::from_prototype_unchecked(num_bands, attenuation_db, cutoff, proto)
    }

    fn from_prototype_unchecked(num_bands: usize, attenuation_db: f64, cutoff: f64, proto: Vec<f64>) -> Self {
        let analysis = modulate(&proto, num_bands, 1.0);
        let synthesis = modulate(&proto, num_bands, -1.0);
        Self {
            num_bands,
            taps: proto.len(),
            cutoff,
            attenuation_db,
            prototype: proto,
            analysis,
            synthesis,
            certified_snr_db: f64::NAN,
        }
    }

    /// Designs an `num_bands`-band bank with a `taps`-tap prototype.
    /// The conventional choice is `taps = 8 * num_bands`, `attenuation_db = 100`.
    pub fn design(num_bands: usize, taps: usize, attenuation_db: f64) -> Result<Self> {
        check_geometry(num_bands, taps)?;
        if !(attenuation_db > 0.0 && attenuation_db.is_finite()) {
            return Err(Error::Design(format!("attenuation {attenuation_db} dB must be positive")));
        }
        let unit = 1.0 / (2 * num_bands) as f64;
        let objective = |c: f64| Self::with_cutoff(num_bands, taps, attenuation_db, c).impulse_error();
        let cutoff = golden_section(objective, 0.25 * unit, 1.5 * unit);
        let mut bank = Self::with_cutoff(num_bands, taps, attenuation_db, cutoff);
        bank.certified_snr_db = bank.measure_noise_snr(CERTIFY_SEED, CERTIFY_LEN);
        if !(bank.certified_snr_db >= MIN_CERTIFIED_SNR_DB) {
            return Err(Error::Design(format!(
                "best cutoff {cutoff:.6} only reaches {:.1} dB reconstruction SNR",
                bank.certified_snr_db
            )));
        }
        Ok(bank)
    }

    /// Default geometry: `8M` taps, 100 dB Kaiser attenuation.
    pub fn design_default(num_bands: usize) -> Result<Self> {
        Self::design(num_bands, 8 * num_bands, 100.0)
    }

    /// Rebuilds a bank from its stored prototype.
    pub fn from_document(doc: &BankDocument) -> Result<Self> {
        check_geometry(doc.num_bands, doc.taps)?;
        if doc.prototype.len() != doc.taps {
            return Err(Error::Format(format!("prototype has {} taps, header says {}", doc.prototype.len(), doc.taps)));
        }
        if doc.prototype.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite prototype tap".into()));
        }
        let mut bank =
            Self::from_prototype_unchecked(doc.num_bands, doc.attenuation_db, doc.cutoff, doc.prototype.clone());
        bank.certified_snr_db = bank.measure_noise_snr(CERTIFY_SEED, CERTIFY_LEN);
        Ok(bank)
    }

    pub fn to_document(&self) -> BankDocument {
        BankDocument {
            num_bands: self.num_bands,
            taps: self.taps,
            cutoff: self.cutoff,
            attenuation_db: self.attenuation_db,
            prototype: self.prototype.clone(),
        }
    }

    pub fn num_bands(&self) -> usize {
        self.num_bands
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    /// Prototype cutoff in cycles per sample.
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn attenuation_db(&self) -> f64 {
        self.attenuation_db
    }

    pub fn prototype(&self) -> &[f64] {
        &self.prototype
    }

    /// `[M, N]` analysis kernels `H_i`.
    pub fn analysis_kernels(&self) -> &Tensor {
        &self.analysis
    }

    /// `[M, N]` synthesis kernels `G_i`.
    pub fn synthesis_kernels(&self) -> &Tensor {
        &self.synthesis
    }

    /// Round-trip SNR measured on seeded white noise at design time.
    pub fn certified_snr_db(&self) -> f64 {
        self.certified_snr_db
    }

    /// Left padding applied by both analysis and synthesis.
    pub fn pad_left(&self) -> usize {
        (self.taps - self.num_bands) / 2
    }

    pub fn pad_right(&self) -> usize {
        self.taps - self.num_bands - self.pad_left()
    }

    fn analysis_spec(&self) -> ConvSpec {
        ConvSpec::new(1, self.num_bands, self.taps).stride(self.num_bands).padding(self.pad_left(), self.pad_right())
    }

    fn synthesis_spec(&self) -> ConvSpec {
        ConvSpec::new(self.num_bands, 1, self.taps).stride(self.num_bands).padding(self.pad_left(), self.pad_right())
    }

    /// Splits `signal` into `M` decimated bands. A length that is not a
    /// multiple of `M` is zero-padded on the right first.
    pub fn analyze(&self, signal: &Signal) -> Result<Subbands> {
        let m = self.num_bands;
        let original_len = signal.len();
        let padded_len = original_len.div_ceil(m).max(1) * m;
        let mut x = signal.samples().to_vec();
        x.resize(padded_len, 0.0);
        let input = Tensor::from_parts(vec![1, padded_len], x);
        let reversed: Vec<f64> = (0..m).flat_map(|i| self.analysis.row(i).iter().rev().copied()).collect();
        let weight = Tensor::from_parts(vec![m, 1, self.taps], reversed);
        let bias = Tensor::from_parts(vec![m], vec![0.0; m]);
        let bands = conv1d(&input, &weight, &bias, &self.analysis_spec())?;
        debug_assert_eq!(bands.shape(), [m, padded_len / m]);
        Ok(Subbands { bands, sample_rate_hz: signal.sample_rate_hz(), original_len })
    }

    /// Recombines bands into a signal of `M * L` samples.
    pub fn synthesize(&self, subbands: &Subbands) -> Result<Signal> {
        let m = self.num_bands;
        if subbands.num_bands() != m {
            return shape(format!("{} subbands given to a {m}-band bank", subbands.num_bands()));
        }
        let weight = Tensor::from_parts(vec![m, 1, self.taps], self.synthesis.data().to_vec());
        let bias = Tensor::from_parts(vec![1], vec![0.0]);
        let out = conv1d_transposed(subbands.bands(), &weight, &bias, &self.synthesis_spec())?;
        let gain = m as f64;
        let samples: Vec<f64> = out.into_data().into_iter().map(|v| v * gain).collect();
        debug_assert_eq!(samples.len(), m * subbands.band_len());
        Ok(Signal::from_parts(samples, subbands.sample_rate_hz()))
    }

    /// Squared round-trip error of unit impulses placed at each decimation
    /// phase, far enough apart not to interact.
    fn impulse_error(&self) -> f64 {
        let m = self.num_bands;
        let spacing = 2 * self.taps + 1;
        let len = (2 * self.taps + m * spacing + 2 * self.taps).div_ceil(m) * m;
        let mut x = vec![0.0; len];
        for phase in 0..m {
            x[2 * self.taps + phase * spacing] = 1.0;
        }
        let sig = Signal::from_parts(x.clone(), 1);
        let y = self.analyze(&sig).and_then(|s| self.synthesize(&s)).expect("bank geometry validated at construction");
        y.samples().iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum()
    }

    /// Round-trip SNR on `len` samples of seeded white noise, ignoring
    /// `taps` samples at each edge.
    pub fn measure_noise_snr(&self, seed: u64, len: usize) -> f64 {
        let x = Xoshiro::seed_from_u64(seed).gaussian_vec(len);
        let sig = Signal::from_parts(x, 1);
        match self.analyze(&sig).and_then(|s| self.synthesize(&s)) {
            Ok(y) => reconstruction_snr_db(sig.samples(), y.samples(), self.taps),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// Magnitude response of analysis filter `band` in dB at `n_points`
    /// frequencies spaced uniformly over `[0, 0.5]` cycles per sample
    /// (equivalently, the DFT of the kernel zero-padded to `2 (n_points - 1)`).
    pub fn band_frequency_response(&self, band: usize, n_points: usize) -> Result<Vec<(f64, f64)>> {
        if band >= self.num_bands {
            return arg(format!("band {band} out of range for {} bands", self.num_bands));
        }
        if n_points < 2 {
            return arg("need at least 2 frequency points");
        }
        let h = self.analysis.row(band);
        Ok((0..n_points)
            .map(|k| {
                let f = 0.5 * k as f64 / (n_points - 1) as f64;
                let (mut re, mut im) = (0.0, 0.0);
                for (n, &v) in h.iter().enumerate() {
                    let ph = -2.0 * std::f64::consts::PI * f * n as f64;
                    re += v * ph.cos();
                    im += v * ph.sin();
                }
                (f, 20.0 * (re.hypot(im).max(1e-300)).log10())
            })
            .collect())
    }
}

/// SNR in dB between `reference` and `estimate`, skipping `edge` samples at
/// both ends.
pub fn reconstruction_snr_db(reference: &[f64], estimate: &[f64], edge: usize) -> f64 {
    let n = reference.len().min(estimate.len());
    if n <= 2 * edge {
        return f64::NEG_INFINITY;
    }
    let (mut sig, mut err) = (0.0, 0.0);
    for (a, b) in reference[edge..n - edge].iter().zip(&estimate[edge..n - edge]) {
        sig += a * a;
        err += (a - b) * (a - b);
    }
    if err == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (sig / err).log10()
}

/// Minimizes a unimodal function on `[lo, hi]`.
fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..GOLDEN_MAX_ITERS {
        if (hi - lo).abs() < GOLDEN_TOL {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}
