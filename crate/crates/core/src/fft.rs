//! Real-input FFT for power-of-two lengths.

use std::sync::Arc;

pub use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{arg, Result};

/// A planned forward transform of length `n` returning the `n/2 + 1`
/// non-negative-frequency bins. Bin `k` is `Σ_t x[t] exp(-2πi k t / n)`.
#[derive(Clone)]
pub struct RealFft {
    n: usize,
    plan: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for RealFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RealFft").field("n", &self.n).finish()
    }
}

impl RealFft {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return arg(format!("FFT length {n} is not a power of two"));
        }
        let plan = FftPlanner::new().plan_fft_forward(n);
        Ok(Self { n, plan })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bins(&self) -> usize {
        self.n / 2 + 1
    }

    /// Transforms `frame`, zero-padding it to the planned length.
    pub fn process(&self, frame: &[f64]) -> Result<Vec<Complex64>> {
        if frame.len() > self.n {
            return arg(format!("frame of {} samples exceeds FFT length {}", frame.len(), self.n));
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n];
        for (b, &x) in buf.iter_mut().zip(frame) {
            b.re = x;
        }
        self.plan.process(&mut buf);
        buf.truncate(self.bins());
        Ok(buf)
    }
}

/// One-shot transform; plan a [`RealFft`] when transforming many frames.
pub fn rfft(frame: &[f64], n: usize) -> Result<Vec<Complex64>> {
    RealFft::new(n)?.process(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro;

    fn naive_dft(x: &[f64], n: usize) -> Vec<Complex64> {
        (0..=n / 2)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| {
                        let ph = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                        Complex64::new(v * ph.cos(), v * ph.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn impulse_and_constant() {
        let mut imp = vec![0.0; 8];
        imp[0] = 1.0;
        for b in rfft(&imp, 8).unwrap() {
            assert_eq!(b, Complex64::new(1.0, 0.0));
        }
        let c = rfft(&[1.0; 8], 8).unwrap();
        assert!((c[0] - Complex64::new(8.0, 0.0)).norm() < 1e-12);
        for b in &c[1..] {
            assert!(b.norm() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_dft() {
        let mut rng = Xoshiro::seed_from_u64(11);
        let x: Vec<f64> = (0..64).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let fast = rfft(&x, 64).unwrap();
        let slow = naive_dft(&x, 64);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() <= 1e-10 * b.norm().max(1.0));
        }
        // zero-padded short frame
        let fast = rfft(&x[..40], 128).unwrap();
        let slow = naive_dft(&x[..40], 128);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() <= 1e-10 * b.norm().max(1.0));
        }
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(rfft(&[1.0; 4], 6).is_err());
        assert!(rfft(&[1.0; 9], 8).is_err());
        assert!(RealFft::new(0).is_err());
    }
}
