use crate::error::{arg, Error, Result};
use crate::signal::Signal;

/// Largest magnitude reported, in dB. Identical signals would otherwise
/// divide by (nearly) zero.
pub const SI_SDR_CAP_DB: f64 = 100.0;

/// Scale-invariant signal-to-distortion ratio in dB.
///
/// The estimate is projected onto the reference, `s = (<e, r> / |r|²) r`,
/// and the result is `10 log10(|s|² / |e - s|²)`, clamped to
/// `±SI_SDR_CAP_DB` when either term vanishes relative to the other.
pub fn si_sdr(reference: &Signal, estimate: &Signal) -> Result<f64> {
    si_sdr_slices(reference.samples(), estimate.samples())
}

pub fn si_sdr_slices(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    if reference.len() != estimate.len() {
        return arg(format!("length mismatch: reference {} vs estimate {}", reference.len(), estimate.len()));
    }
    if reference.is_empty() {
        return arg("empty signals");
    }
    let ref_energy: f64 = reference.iter().map(|v| v * v).sum();
    if ref_energy == 0.0 {
        return Err(Error::Degenerate("reference is identically zero".into()));
    }
    let alpha = reference.iter().zip(estimate).map(|(r, e)| r * e).sum::<f64>() / ref_energy;
    let target = alpha * alpha * ref_energy;
    let residual: f64 = reference.iter().zip(estimate).map(|(r, e)| (e - alpha * r).powi(2)).sum();
    if residual < 1e-10 * target {
        return Ok(SI_SDR_CAP_DB);
    }
    if target < 1e-10 * residual {
        return Ok(-SI_SDR_CAP_DB);
    }
    Ok(10.0 * (target / residual).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro;

    #[test]
    fn identical_and_scaled() {
        let x = Xoshiro::seed_from_u64(1).gaussian_vec(1000);
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert_eq!(si_sdr_slices(&x, &x).unwrap(), SI_SDR_CAP_DB);
        assert_eq!(si_sdr_slices(&x, &y).unwrap(), SI_SDR_CAP_DB);
    }

    #[test]
    fn errors() {
        assert!(matches!(si_sdr_slices(&[0.0; 4], &[1.0; 4]), Err(Error::Degenerate(_))));
        assert!(matches!(si_sdr_slices(&[1.0; 4], &[1.0; 5]), Err(Error::Argument(_))));
    }

    #[test]
    fn orthogonal_estimate_hits_lower_cap() {
        let r = [1.0, 0.0, 1.0, 0.0];
        let e = [0.0, 1.0, 0.0, 1.0];
        assert_eq!(si_sdr_slices(&r, &e).unwrap(), -SI_SDR_CAP_DB);
    }
}
