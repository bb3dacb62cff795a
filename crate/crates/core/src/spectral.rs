//! Averaged cross-spectral estimation between two simultaneous recordings,
//! the transfer function and coherence derived from it, and spectrograms.
//!
//! Segments are Hann-windowed (periodic form), transformed, and averaged:
//! `pxx = <|X|²>`, `pyy = <|Y|²>`, `pxy = <conj(X) Y>`, each scaled to a
//! one-sided density. The transfer function is the H1 estimate `pxy / pxx`,
//! and the magnitude-squared coherence is `|pxy|² / (pxx pyy)`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::fft::{Complex64, RealFft};
use crate::signal::Signal;
use crate::window::hann_periodic;

/// Bins whose auto-spectrum falls below this fraction of its maximum are
/// treated as carrying no signal.
pub const MASK_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchConfig {
    /// Segment length in samples; a power of two.
    pub segment_len: usize,
    /// Fractional overlap between consecutive segments, in `[0, 1)`.
    pub overlap: f64,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self { segment_len: 1024, overlap: 0.5 }
    }
}

impl WelchConfig {
    pub fn hop(&self) -> usize {
        ((self.segment_len as f64 * (1.0 - self.overlap)).round() as usize).max(1)
    }

    /// Number of whole segments that fit in `len` samples.
    pub fn segments(&self, len: usize) -> usize {
        if len < self.segment_len {
            0
        } else {
            (len - self.segment_len) / self.hop() + 1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    pub frequencies_hz: Vec<f64>,
    pub pxx: Vec<f64>,
    pub pyy: Vec<f64>,
    pub pxy: Vec<Complex64>,
    pub segments: usize,
}

/// Welch-averaged auto- and cross-spectra of `x` (input) and `y` (output).
pub fn welch_cross(x: &Signal, y: &Signal, config: &WelchConfig) -> Result<SpectralEstimate> {
    if x.len() != y.len() {
        return arg(format!("signal lengths differ: {} vs {}", x.len(), y.len()));
    }
    if x.sample_rate_hz() != y.sample_rate_hz() {
        return arg(format!("sample rates differ: {} vs {}", x.sample_rate_hz(), y.sample_rate_hz()));
    }
    if !(0.0..1.0).contains(&config.overlap) {
        return arg(format!("overlap {} outside [0, 1)", config.overlap));
    }
    let fft = RealFft::new(config.segment_len)?;
    let segments = config.segments(x.len());
    if segments < 2 {
        return arg(format!(
            "{} samples give {segments} segment(s) of {}; need at least 2",
            x.len(),
            config.segment_len
        ));
    }
    let win = hann_periodic(config.segment_len);
    let hop = config.hop();
    let bins = fft.bins();
    let mut pxx = vec![0.0; bins];
    let mut pyy = vec![0.0; bins];
    let mut pxy = vec![Complex64::new(0.0, 0.0); bins];
    let mut bx = vec![0.0; config.segment_len];
    let mut by = vec![0.0; config.segment_len];
    for s in 0..segments {
        let start = s * hop;
        let xs = &x.samples()[start..start + config.segment_len];
        let ys = &y.samples()[start..start + config.segment_len];
        for i in 0..config.segment_len {
            bx[i] = xs[i] * win[i];
            by[i] = ys[i] * win[i];
        }
        let fx = fft.process(&bx)?;
        let fy = fft.process(&by)?;
        for k in 0..bins {
            pxx[k] += fx[k].norm_sqr();
            pyy[k] += fy[k].norm_sqr();
            pxy[k] += fx[k].conj() * fy[k];
        }
    }
    let fs = f64::from(x.sample_rate_hz());
    let win_power: f64 = win.iter().map(|w| w * w).sum();
    let base = 1.0 / (fs * win_power * segments as f64);
    for k in 0..bins {
        let one_sided = if k == 0 || k == bins - 1 { 1.0 } else { 2.0 };
        pxx[k] *= base * one_sided;
        pyy[k] *= base * one_sided;
        pxy[k] *= base * one_sided;
    }
    let frequencies_hz = (0..bins).map(|k| k as f64 * fs / config.segment_len as f64).collect();
    Ok(SpectralEstimate { frequencies_hz, pxx, pyy, pxy, segments })
}

fn threshold(p: &[f64]) -> f64 {
    MASK_REL * p.iter().copied().fold(0.0, f64::max)
}

impl SpectralEstimate {
    /// H1 transfer function estimate `pxy / pxx`; `None` where the input
    /// carries no energy.
    pub fn transfer_function(&self) -> Result<Vec<Option<Complex64>>> {
        let thr = threshold(&self.pxx);
        let h: Vec<_> = self.pxx.iter().zip(&self.pxy).map(|(&p, &c)| (p > thr).then(|| c / p)).collect();
        if h.iter().all(Option::is_none) {
            return Err(Error::Degenerate("input spectrum is silent".into()));
        }
        Ok(h)
    }

    /// `|pxy|² / (pxx pyy)` without clamping; `None` at masked bins.
    pub fn coherence_unclamped(&self) -> Result<Vec<Option<f64>>> {
        let tx = threshold(&self.pxx);
        let ty = threshold(&self.pyy);
        let c: Vec<_> = (0..self.pxx.len())
            .map(|k| {
                (self.pxx[k] > tx && self.pyy[k] > ty).then(|| self.pxy[k].norm_sqr() / (self.pxx[k] * self.pyy[k]))
            })
            .collect();
        if c.iter().all(Option::is_none) {
            return Err(Error::Degenerate("input or output spectrum is silent".into()));
        }
        Ok(c)
    }

    /// Magnitude-squared coherence clamped to `[0, 1]`; masked bins read 0.
    pub fn coherence(&self) -> Result<Vec<f64>> {
        Ok(self.coherence_unclamped()?.into_iter().map(|c| c.map_or(0.0, |v| v.clamp(0.0, 1.0))).collect())
    }
}

pub fn transfer_function(estimate: &SpectralEstimate) -> Result<Vec<Option<Complex64>>> {
    estimate.transfer_function()
}

pub fn coherence(estimate: &SpectralEstimate) -> Result<Vec<f64>> {
    estimate.coherence()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramConfig {
    pub frame: usize,
    pub hop: usize,
    pub floor_db: f64,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        Self { frame: 512, hop: 128, floor_db: -80.0 }
    }
}

/// Magnitudes in dB, one row per frame and one column per frequency bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub rows: usize,
    pub cols: usize,
    pub floor_db: f64,
    pub sample_rate_hz: u32,
    pub frame: usize,
    pub hop: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramSidecar {
    pub rows: usize,
    pub cols: usize,
    pub floor_db: f64,
}

/// Hann-windowed short-time magnitude spectrum in dB, scaled so that a
/// unit-amplitude sinusoid centred on a bin reads 0 dB, clipped below at
/// `floor_db`. There are `floor((T - frame) / hop) + 1` frames.
pub fn spectrogram(signal: &Signal, config: &SpectrogramConfig) -> Result<Spectrogram> {
    if signal.len() < config.frame {
        return arg(format!("signal of {} samples is shorter than one {}-sample frame", signal.len(), config.frame));
    }
    if config.hop == 0 {
        return arg("hop must be positive");
    }
    let fft = RealFft::new(config.frame)?;
    let win = hann_periodic(config.frame);
    let scale = 2.0 / win.iter().sum::<f64>();
    let rows = (signal.len() - config.frame) / config.hop + 1;
    let cols = fft.bins();
    let mut data = Vec::with_capacity(rows * cols);
    let mut buf = vec![0.0; config.frame];
    for r in 0..rows {
        let seg = &signal.samples()[r * config.hop..r * config.hop + config.frame];
        for i in 0..config.frame {
            buf[i] = seg[i] * win[i];
        }
        data.extend(fft.process(&buf)?.into_iter().map(|c| {
            let mag = c.norm() * scale;
            if mag > 0.0 {
                (20.0 * mag.log10()).max(config.floor_db)
            } else {
                config.floor_db
            }
        }));
    }
    Ok(Spectrogram {
        rows,
        cols,
        floor_db: config.floor_db,
        sample_rate_hz: signal.sample_rate_hz(),
        frame: config.frame,
        hop: config.hop,
        data,
    })
}

impl Spectrogram {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn bin_hz(&self, k: usize) -> f64 {
        k as f64 * f64::from(self.sample_rate_hz) / self.frame as f64
    }

    /// Mean power (linear average, reported in dB) over bins with centre
    /// frequency in `[lo_hz, hi_hz)` across all frames.
    pub fn mean_band_db(&self, lo_hz: f64, hi_hz: f64) -> f64 {
        let mut acc = 0.0;
        let mut n = 0usize;
        for r in 0..self.rows {
            for (k, &v) in self.row(r).iter().enumerate() {
                let f = self.bin_hz(k);
                if f >= lo_hz && f < hi_hz {
                    acc += 10f64.powf(v / 10.0);
                    n += 1;
                }
            }
        }
        10.0 * (acc / n.max(1) as f64).log10()
    }

    pub fn sidecar(&self) -> SpectrogramSidecar {
        SpectrogramSidecar { rows: self.rows, cols: self.cols, floor_db: self.floor_db }
    }

    /// Comma-separated matrix, one line per frame.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        for r in 0..self.rows {
            let line: Vec<String> = self.row(r).iter().map(|v| format!("{v:.4}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Raw little-endian `f32` matrix (row-major) plus a JSON sidecar at
    /// `<path>.json`.
    pub fn write_raw(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes: Vec<u8> = self.data.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
        std::fs::write(path, bytes)?;
        let mut side = path.as_os_str().to_owned();
        side.push(".json");
        let json = serde_json::to_string_pretty(&self.sidecar()).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(side, json)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro;

    const FS: u32 = 16000;

    fn noise(seed: u64, n: usize) -> Signal {
        Signal::new(Xoshiro::seed_from_u64(seed).gaussian_vec(n), FS).unwrap()
    }

    #[test]
    fn identical_inputs_give_real_equal_cross_spectrum() {
        let x = noise(1, 8192);
        let e = welch_cross(&x, &x, &WelchConfig::default()).unwrap();
        for k in 0..e.pxx.len() {
            assert!((e.pxy[k].re - e.pxx[k]).abs() <= 1e-10 * e.pxx[k]);
            assert!(e.pxy[k].im.abs() <= 1e-10 * e.pxx[k]);
        }
    }

    #[test]
    fn delay_shows_as_linear_phase() {
        let d = 5usize;
        let base = noise(2, 40_000);
        let x = Signal::new(base.samples()[d..].to_vec(), FS).unwrap();
        let y = Signal::new(base.samples()[..base.len() - d].to_vec(), FS).unwrap();
        let e = welch_cross(&x, &y, &WelchConfig::default()).unwrap();
        let h = e.transfer_function().unwrap();
        for k in [10usize, 40, 80] {
            let f = e.frequencies_hz[k] / f64::from(FS);
            let want = -2.0 * std::f64::consts::PI * f * d as f64;
            let got = h[k].unwrap().arg();
            let diff = (got - want).rem_euclid(std::f64::consts::TAU);
            let diff = diff.min(std::f64::consts::TAU - diff);
            assert!(diff < 0.05, "bin {k}: {got} vs {want}");
            assert!((h[k].unwrap().norm() - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn independent_noise_has_low_coherence() {
        let cfg = WelchConfig::default();
        let n = cfg.segment_len + 29 * cfg.hop();
        let e = welch_cross(&noise(3, n), &noise(4, n), &cfg).unwrap();
        assert_eq!(e.segments, 30);
        let c = e.coherence().unwrap();
        let mean = c.iter().sum::<f64>() / c.len() as f64;
        assert!(mean < 0.2, "{mean}");
        assert!(mean <= 3.0 * 2.0 / 30.0);
    }

    #[test]
    fn scaled_copy_has_flat_transfer_function() {
        let x = noise(5, 16384);
        let y = x.scaled(0.5).unwrap();
        let e = welch_cross(&x, &y, &WelchConfig::default()).unwrap();
        for h in e.transfer_function().unwrap().into_iter().flatten() {
            assert!((h - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn argument_errors() {
        let cfg = WelchConfig::default();
        assert!(welch_cross(&noise(1, 2000), &noise(1, 2001), &cfg).is_err());
        assert!(welch_cross(&noise(1, 1200), &noise(1, 1200), &cfg).is_err());
        let z = Signal::zeros(4096, FS).unwrap();
        let e = welch_cross(&z, &z, &cfg).unwrap();
        assert!(matches!(e.transfer_function(), Err(Error::Degenerate(_))));
        assert!(matches!(e.coherence(), Err(Error::Degenerate(_))));
    }

    #[test]
    fn spectrogram_sine_and_silence() {
        let s: Vec<f64> = (0..8000).map(|t| (2.0 * std::f64::consts::PI * 1000.0 * t as f64 / 16000.0).sin()).collect();
        let sg = spectrogram(&Signal::new(s, FS).unwrap(), &SpectrogramConfig::default()).unwrap();
        assert_eq!(sg.rows, (8000 - 512) / 128 + 1);
        assert_eq!(sg.cols, 257);
        for r in 0..sg.rows {
            let row = sg.row(r);
            let k = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert_eq!(k, 32);
            assert!(row[32].abs() < 0.1);
        }
        let z = spectrogram(&Signal::zeros(1024, FS).unwrap(), &SpectrogramConfig::default()).unwrap();
        assert!(z.data.iter().all(|&v| v == -80.0));
        assert!(spectrogram(&Signal::zeros(100, FS).unwrap(), &SpectrogramConfig::default()).is_err());
    }

    #[test]
    fn raw_export_has_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("spec.f32");
        let sg = spectrogram(&noise(6, 2048), &SpectrogramConfig::default()).unwrap();
        sg.write_raw(&p).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len() as usize, sg.rows * sg.cols * 4);
        let side: SpectrogramSidecar =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("spec.f32.json")).unwrap()).unwrap();
        assert_eq!(side, sg.sidecar());
    }
}
