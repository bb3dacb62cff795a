//! Short-time objective intelligibility.
//!
//! Both signals are resampled to 10 kHz. Frames of 256 samples (50 %
//! overlap, Hann) whose reference energy lies more than 40 dB below the
//! loudest frame are dropped from both signals, which are then rebuilt by
//! overlap-add. Each rebuilt signal is transformed with a 512-point FFT and
//! grouped into 15 one-third-octave bands starting at 150 Hz. Over every
//! window of 30 consecutive frames the degraded band envelope is normalized
//! to the clean one, clipped at 15 dB above it, and correlated with it; the
//! score is the mean correlation over bands and windows.

use crate::error::{arg, Error, Result};
use crate::fft::RealFft;
use crate::signal::Signal;
use crate::window::hann_interior;

use super::resample::resample;

pub const STOI_RATE_HZ: u32 = 10_000;
const FRAME: usize = 256;
const HOP: usize = FRAME / 2;
const NFFT: usize = 512;
const NUM_BANDS: usize = 15;
const MIN_FREQ_HZ: f64 = 150.0;
const SEGMENT: usize = 30;
const BETA_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;
const EPS: f64 = f64::EPSILON;

/// Diagnostics from one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct StoiDetail {
    pub score: f64,
    pub frames_total: usize,
    pub frames_kept: usize,
    pub segments: usize,
}

/// Frame start offsets: every `hop` samples while a full frame fits, the
/// last full frame excluded.
fn frame_starts(len: usize, frame: usize, hop: usize) -> impl Iterator<Item = usize> {
    (0..len.saturating_sub(frame)).step_by(hop)
}

/// `[lo, hi)` FFT-bin ranges of the one-third-octave bands.
fn third_octave_bins() -> Vec<(usize, usize)> {
    let bin_hz = |k: usize| k as f64 * f64::from(STOI_RATE_HZ) / NFFT as f64;
    let nearest = |f: f64| {
        (0..=NFFT / 2)
            .min_by(|&a, &b| (bin_hz(a) - f).powi(2).total_cmp(&(bin_hz(b) - f).powi(2)))
            .expect("non-empty bin range")
    };
    (0..NUM_BANDS)
        .map(|k| {
            let k = k as f64;
            let lo = MIN_FREQ_HZ * 2f64.powf((2.0 * k - 1.0) / 6.0);
            let hi = MIN_FREQ_HZ * 2f64.powf((2.0 * k + 1.0) / 6.0);
            (nearest(lo), nearest(hi))
        })
        .collect()
}

fn remove_silent_frames(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>, usize, usize) {
    let w = hann_interior(FRAME);
    let starts: Vec<usize> = frame_starts(x.len(), FRAME, HOP).collect();
    let energy_db: Vec<f64> = starts
        .iter()
        .map(|&s| {
            let e: f64 = (0..FRAME).map(|i| (w[i] * x[s + i]).powi(2)).sum();
            20.0 * (e.sqrt() + EPS).log10()
        })
        .collect();
    let max_db = energy_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> =
        starts.iter().zip(&energy_db).filter(|(_, &e)| max_db - DYN_RANGE_DB - e < 0.0).map(|(&s, _)| s).collect();
    if kept.is_empty() {
        return (Vec::new(), Vec::new(), starts.len(), 0);
    }
    let out_len = (kept.len() - 1) * HOP + FRAME;
    let mut xs = vec![0.0; out_len];
    let mut ys = vec![0.0; out_len];
    for (j, &s) in kept.iter().enumerate() {
        for i in 0..FRAME {
            xs[j * HOP + i] += w[i] * x[s + i];
            ys[j * HOP + i] += w[i] * y[s + i];
        }
    }
    (xs, ys, starts.len(), kept.len())
}

/// `[bands][frames]` one-third-octave envelope of `x`.
fn band_envelopes(x: &[f64], fft: &RealFft, bands: &[(usize, usize)]) -> Result<Vec<Vec<f64>>> {
    let w = hann_interior(FRAME);
    let mut env = vec![Vec::new(); bands.len()];
    let mut buf = vec![0.0; FRAME];
    for s in frame_starts(x.len(), FRAME, HOP) {
        for i in 0..FRAME {
            buf[i] = w[i] * x[s + i];
        }
        let spec = fft.process(&buf)?;
        for (b, &(lo, hi)) in bands.iter().enumerate() {
            env[b].push(spec[lo..hi].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt());
        }
    }
    Ok(env)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn stoi_detailed(reference: &Signal, estimate: &Signal) -> Result<StoiDetail> {
    if reference.len() != estimate.len() {
        return arg(format!("length mismatch: reference {} vs estimate {}", reference.len(), estimate.len()));
    }
    if reference.sample_rate_hz() != estimate.sample_rate_hz() {
        return arg("sample rates differ");
    }
    let fs = reference.sample_rate_hz();
    let x = resample(reference.samples(), fs, STOI_RATE_HZ);
    let y = resample(estimate.samples(), fs, STOI_RATE_HZ);

    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("reference is silent".into()));
    }
    let (xs, ys, frames_total, frames_kept) = remove_silent_frames(&x, &y);
    let fft = RealFft::new(NFFT)?;
    let bands = third_octave_bins();
    let xe = band_envelopes(&xs, &fft, &bands)?;
    let ye = band_envelopes(&ys, &fft, &bands)?;
    let n_frames = xe[0].len();
    if n_frames < SEGMENT {
        return Err(Error::Degenerate(format!("{n_frames} non-silent frames after silence removal; need {SEGMENT}")));
    }

    let clip = 10f64.powf(-BETA_DB / 20.0);
    let segments = n_frames - SEGMENT + 1;
    let mut total = 0.0;
    let mut xseg = vec![0.0; SEGMENT];
    let mut yseg = vec![0.0; SEGMENT];
    for m in 0..segments {
        for b in 0..NUM_BANDS {
            xseg.copy_from_slice(&xe[b][m..m + SEGMENT]);
            yseg.copy_from_slice(&ye[b][m..m + SEGMENT]);
            let alpha = norm(&xseg) / (norm(&yseg) + EPS);
            for (yv, &xv) in yseg.iter_mut().zip(&xseg) {
                *yv = (*yv * alpha).min(xv * (1.0 + clip));
            }
            let ym = yseg.iter().sum::<f64>() / SEGMENT as f64;
            let xm = xseg.iter().sum::<f64>() / SEGMENT as f64;
            yseg.iter_mut().for_each(|v| *v -= ym);
            xseg.iter_mut().for_each(|v| *v -= xm);
            let yn = norm(&yseg) + EPS;
            let xn = norm(&xseg) + EPS;
            total += xseg.iter().zip(&yseg).map(|(a, b)| (a / xn) * (b / yn)).sum::<f64>();
        }
    }
    Ok(StoiDetail { score: total / (segments * NUM_BANDS) as f64, frames_total, frames_kept, segments })
}

/// Intelligibility score in `[-1, 1]` of `estimate` against `reference`.
pub fn stoi(reference: &Signal, estimate: &Signal) -> Result<f64> {
    stoi_detailed(reference, estimate).map(|d| d.score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro;

    #[test]
    fn band_edges_match_reference_table() {
        // lowest and highest band edges on the 512-point grid at 10 kHz
        let b = third_octave_bins();
        assert_eq!(b.len(), 15);
        assert_eq!(b[0], (7, 9));
        assert_eq!(b[14], (174, 219));
        for w in b.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
    }

    #[test]
    fn silent_input_is_degenerate() {
        let z = Signal::zeros(20_000, 10_000).unwrap();
        let r = stoi(&z, &z);
        assert!(matches!(r, Err(Error::Degenerate(_))), "{r:?}");
    }

    #[test]
    fn self_score_is_one() {
        let x = Signal::new(Xoshiro::seed_from_u64(3).gaussian_vec(20_000), 16_000).unwrap();
        assert!((stoi(&x, &x).unwrap() - 1.0).abs() < 1e-9);
    }
}
