//! Hinge adversarial losses and the feature-matching reconstruction loss.
//!
//! Each function takes the per-scale outputs of one example; the `_batch`
//! variants average over examples.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};

use super::discriminator::DiscriminatorOutput;

pub const DEFAULT_LAMBDA: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_d: f64,
    pub l_g_adv: f64,
    pub l_g_rec: f64,
    pub lambda: f64,
    pub l_g: f64,
}

fn check_pairs(real: &[DiscriminatorOutput], fake: &[DiscriminatorOutput]) -> Result<()> {
    if real.is_empty() {
        return arg("no discriminator outputs");
    }
    if real.len() != fake.len() {
        return arg(format!("{} real scales vs {} fake scales", real.len(), fake.len()));
    }
    for (k, (r, f)) in real.iter().zip(fake).enumerate() {
        if r.logits.shape() != f.logits.shape() {
            return arg(format!("scale {k}: logits {:?} vs {:?}", r.logits.shape(), f.logits.shape()));
        }
    }
    Ok(())
}

/// Mean over scales of the time-averaged `max(0, 1 - sign * D)`.
fn hinge(outputs: &[DiscriminatorOutput], sign: f64) -> f64 {
    let total: f64 = outputs
        .iter()
        .map(|o| {
            let d = o.logits.data();
            d.iter().map(|&v| (1.0 - sign * v).max(0.0)).sum::<f64>() / d.len() as f64
        })
        .sum();
    total / outputs.len() as f64
}

/// Discriminator hinge loss: real logits pushed above +1, fake below -1.
pub fn loss_discriminator(real: &[DiscriminatorOutput], fake: &[DiscriminatorOutput]) -> Result<f64> {
    check_pairs(real, fake)?;
    Ok(hinge(real, 1.0) + hinge(fake, -1.0))
}

/// Generator hinge loss on fake logits.
pub fn loss_generator_adv(fake: &[DiscriminatorOutput]) -> Result<f64> {
    if fake.is_empty() {
        return arg("no discriminator outputs");
    }
    Ok(hinge(fake, 1.0))
}

/// Feature matching: per layer, the L1 distance over channels summed over
/// time and divided by `T * F`; summed over all layers but the last, then
/// averaged over scales.
pub fn loss_generator_rec(real: &[DiscriminatorOutput], fake: &[DiscriminatorOutput]) -> Result<f64> {
    check_pairs(real, fake)?;
    let mut total = 0.0;
    for (k, (r, f)) in real.iter().zip(fake).enumerate() {
        if r.features.len() != f.features.len() {
            return arg(format!("scale {k}: {} vs {} feature layers", r.features.len(), f.features.len()));
        }
        let included = r.features.len().saturating_sub(1);
        for (l, (a, b)) in r.features.iter().zip(&f.features).take(included).enumerate() {
            if a.shape() != b.shape() {
                return Err(Error::Argument(format!("scale {k} layer {l}: {:?} vs {:?}", a.shape(), b.shape())));
            }
            let l1: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum();
            total += l1 / a.len() as f64;
        }
    }
    Ok(total / real.len() as f64)
}

/// `l_g = adv + lambda * rec`.
pub fn loss_generator_total(adv: f64, rec: f64, lambda: f64) -> Result<LossBreakdown> {
    if !(adv >= 0.0) || !(rec >= 0.0) || !(lambda >= 0.0) || !lambda.is_finite() {
        return arg(format!("loss terms must be non-negative: adv {adv}, rec {rec}, lambda {lambda}"));
    }
    Ok(LossBreakdown { l_d: 0.0, l_g_adv: adv, l_g_rec: rec, lambda, l_g: adv + lambda * rec })
}

impl LossBreakdown {
    /// All three losses for one example.
    pub fn compute(real: &[DiscriminatorOutput], fake: &[DiscriminatorOutput], lambda: f64) -> Result<Self> {
        let adv = loss_generator_adv(fake)?;
        let rec = loss_generator_rec(real, fake)?;
        let mut b = loss_generator_total(adv, rec, lambda)?;
        b.l_d = loss_discriminator(real, fake)?;
        Ok(b)
    }

    /// Batch means of every term; `l_g` is recombined from the means.
    pub fn compute_batch(
        real: &[Vec<DiscriminatorOutput>],
        fake: &[Vec<DiscriminatorOutput>],
        lambda: f64,
    ) -> Result<Self> {
        if real.is_empty() || real.len() != fake.len() {
            return arg(format!("batch sizes {} and {} must match and be non-zero", real.len(), fake.len()));
        }
        let n = real.len() as f64;
        let (mut d, mut adv, mut rec) = (0.0, 0.0, 0.0);
        for (r, f) in real.iter().zip(fake) {
            d += loss_discriminator(r, f)?;
            adv += loss_generator_adv(f)?;
            rec += loss_generator_rec(r, f)?;
        }
        let mut b = loss_generator_total(adv / n, rec / n, lambda)?;
        b.l_d = d / n;
        Ok(b)
    }
}
