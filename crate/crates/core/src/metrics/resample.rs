//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc.

use crate::window::{kaiser, kaiser_beta};

/// Taps of the interpolation filter per polyphase branch.
pub const TAPS_PER_PHASE: usize = 64;
const STOPBAND_DB: f64 = 80.0;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Lowpass prototype for upsampling by `up` then keeping every `down`-th
/// sample: cutoff at the lower of the two Nyquist rates, DC gain `up`.
fn design(up: usize, down: usize) -> Vec<f64> {
    let half = TAPS_PER_PHASE / 2 * up;
    let len = 2 * half + 1;
    let cutoff = 0.5 / up.max(down) as f64;
    let win = kaiser(len, kaiser_beta(STOPBAND_DB));
    let mut h: Vec<f64> = (0..len)
        .map(|n| {
            let x = n as f64 - half as f64;
            let a = 2.0 * cutoff * x;
            let sinc = if a == 0.0 { 1.0 } else { (std::f64::consts::PI * a).sin() / (std::f64::consts::PI * a) };
            2.0 * cutoff * sinc * win[n]
        })
        .collect();
    let sum: f64 = h.iter().sum();
    for v in &mut h {
        *v *= up as f64 / sum;
    }
    h
}

/// Resamples `x` from `from_hz` to `to_hz`. Output sample `k` sits at input
/// time `k * from_hz / to_hz`; there are `ceil(len * to_hz / from_hz)` of them.
pub fn resample(x: &[f64], from_hz: u32, to_hz: u32) -> Vec<f64> {
    if from_hz == to_hz {
        return x.to_vec();
    }
    let g = gcd(from_hz as usize, to_hz as usize);
    let up = to_hz as usize / g;
    let down = from_hz as usize / g;
    let h = design(up, down);
    let half = (h.len() - 1) / 2;
    let out_len = (x.len() * up).div_ceil(down);
    let n = x.len() as isize;
    (0..out_len)
        .map(|k| {
            // position on the upsampled grid
            let j = (k * down) as isize;
            // input i contributes h[j - i*up + half] when that index is valid
            let i_lo = (j - half as isize).div_euclid(up as isize).max(0);
            let i_hi = ((j + half as isize).div_euclid(up as isize)).min(n - 1);
            let mut acc = 0.0;
            let mut i = i_lo;
            while i <= i_hi {
                let idx = j - i * up as isize + half as isize;
                if idx >= 0 && (idx as usize) < h.len() {
                    acc += x[i as usize] * h[idx as usize];
                }
                i += 1;
            }
            acc
        })
        .collect()
}
