//! Algorithmic latency of the analysis → generator → synthesis pipeline.
//!
//! For an output sample `t`, the span of input samples it depends on is
//! found by walking every path back through the network: a convolution
//! maps output span `[lo, hi]` to `[s lo - p, s hi - p + d (K - 1)]`, a
//! transposed convolution to `[ceil((lo + p - d (K - 1)) / s), floor((hi + p) / s)]`,
//! and skip connections take the union. Lookahead is the largest
//! `hi - t` over one period of the pipeline, i.e. how far into the future
//! an output sample reaches. Zero padding at the signal edges is ignored.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::pqmf::PqmfBank;
use crate::tensor::ConvSpec;

use super::config::{down_spec, up_spec, GeneratorConfig};

/// Latency budget for real-time use.
pub const BUDGET_MS: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub lo: i64,
    pub hi: i64,
}

impl Span {
    pub fn point(t: i64) -> Self {
        Self { lo: t, hi: t }
    }

    fn union(self, o: Span) -> Span {
        Span { lo: self.lo.min(o.lo), hi: self.hi.max(o.hi) }
    }

    fn widen(self, by: i64) -> Span {
        Span { lo: self.lo - by, hi: self.hi + by }
    }

    /// Input span of a convolution's output span.
    pub fn through_conv(self, spec: &ConvSpec) -> Span {
        let (s, p, reach) = geometry(spec);
        Span { lo: s * self.lo - p, hi: s * self.hi - p + reach }
    }

    /// Input span of a transposed convolution's output span.
    pub fn through_transposed(self, spec: &ConvSpec) -> Span {
        let (s, p, reach) = geometry(spec);
        Span { lo: ceil_div(self.lo + p - reach, s), hi: (self.hi + p).div_euclid(s) }
    }
}

fn ceil_div(a: i64, b: i64) -> i64 {
    -(-a).div_euclid(b)
}

fn geometry(spec: &ConvSpec) -> (i64, i64, i64) {
    (spec.stride as i64, spec.pad_left as i64, (spec.dilation * (spec.kernel_size - 1)) as i64)
}

/// A layer of a sequential pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChainLayer {
    Conv(ConvSpec),
    Transposed(ConvSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    /// Future input samples an output sample depends on.
    pub lookahead_samples: i64,
    pub lookahead_ms: f64,
    /// Past input samples an output sample depends on.
    pub history_samples: i64,
    pub receptive_field_samples: i64,
    /// Output positions repeat their dependency pattern with this period.
    pub period_samples: usize,
    pub within_budget: bool,
}

fn report(span_of: impl Fn(i64) -> Span, period: usize, sample_rate_hz: u32) -> LatencyReport {
    let (mut ahead, mut behind, mut field) = (i64::MIN, i64::MIN, 0);
    // offset keeps every index positive; the pattern is shift-invariant
    let base = 1i64 << 40;
    for t in base..base + period as i64 {
        let s = span_of(t);
        ahead = ahead.max(s.hi - t);
        behind = behind.max(t - s.lo);
        field = field.max(s.hi - s.lo + 1);
    }
    let lookahead = ahead.max(0);
    let lookahead_ms = 1000.0 * lookahead as f64 / f64::from(sample_rate_hz);
    LatencyReport {
        lookahead_samples: lookahead,
        lookahead_ms,
        history_samples: behind.max(0),
        receptive_field_samples: field,
        period_samples: period,
        within_budget: lookahead_ms <= BUDGET_MS,
    }
}

/// Latency of a rate-preserving sequential chain, input-first order.
pub fn chain_latency(layers: &[ChainLayer], sample_rate_hz: u32) -> Result<LatencyReport> {
    if sample_rate_hz == 0 {
        return arg("sample rate must be positive");
    }
    let (mut down, mut up) = (1usize, 1usize);
    for l in layers {
        match l {
            ChainLayer::Conv(s) => down *= s.stride,
            ChainLayer::Transposed(s) => up *= s.stride,
        }
    }
    if down != up {
        return arg(format!("chain changes the rate by {down}/{up}"));
    }
    let span_of = |t| {
        layers.iter().rev().fold(Span::point(t), |s, l| match l {
            ChainLayer::Conv(c) => s.through_conv(c),
            ChainLayer::Transposed(c) => s.through_transposed(c),
        })
    };
    Ok(report(span_of, down.max(1), sample_rate_hz))
}

struct GeneratorSpans<'a> {
    config: &'a GeneratorConfig,
}

impl GeneratorSpans<'_> {
    fn res_reach(&self) -> i64 {
        self.config.residual_dilations.iter().map(|&d| d as i64).sum()
    }

    fn same(&self, c_in: usize, c_out: usize) -> ConvSpec {
        ConvSpec::new(c_in, c_out, self.config.kernel_size).same()
    }

    /// Span of encoder state `h_i` back to the generator's band input.
    fn through_encoder(&self, i: usize, span: Span) -> Span {
        if i == 0 {
            return span.through_conv(&self.same(1, 1));
        }
        let s = self.config.encoder_strides[i - 1];
        let prev = span.through_conv(&down_spec(1, 1, s)).widen(self.res_reach());
        self.through_encoder(i - 1, prev)
    }

    /// Span of decoder state `d_i` back to the band input.
    fn through_decoder(&self, i: usize, span: Span) -> Span {
        let n = self.config.encoder_strides.len();
        if i == n {
            let k = self.same(1, 1);
            let bottleneck = span.through_conv(&k).through_conv(&k).union(span);
            return self.through_encoder(n, bottleneck);
        }
        let s = self.config.encoder_strides[i];
        let deeper = span.widen(self.res_reach()).through_transposed(&up_spec(1, 1, s));
        self.through_decoder(i + 1, deeper).union(self.through_encoder(i, span))
    }

    /// Span of generator output index back to its band input.
    fn output(&self, span: Span) -> Span {
        self.through_decoder(0, span.through_conv(&self.same(1, 1)))
    }
}

/// Lookahead and receptive field of analysis → generator → synthesis.
pub fn report_latency(config: &GeneratorConfig, bank: &PqmfBank, sample_rate_hz: u32) -> Result<LatencyReport> {
    config.validate()?;
    if bank.num_bands() != config.num_bands {
        return arg(format!("bank has {} bands, config expects {}", bank.num_bands(), config.num_bands));
    }
    if sample_rate_hz == 0 {
        return arg("sample rate must be positive");
    }
    let m = config.num_bands;
    let pqmf = ConvSpec::new(1, 1, bank.taps()).stride(m).padding(bank.pad_left(), bank.pad_right());
    let g = GeneratorSpans { config };
    let span_of = |t| {
        let bands = Span::point(t).through_transposed(&pqmf);
        g.output(bands).through_conv(&pqmf)
    };
    Ok(report(span_of, config.length_multiple(), sample_rate_hz))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn causal_chain_has_no_lookahead() {
        let causal = |k: usize, d: usize| ConvSpec::new(1, 1, k).dilation(d).padding(d * (k - 1), 0);
        let chain = [ChainLayer::Conv(causal(7, 1)), ChainLayer::Conv(causal(3, 9)), ChainLayer::Conv(causal(3, 3))];
        let r = chain_latency(&chain, 16_000).unwrap();
        assert_eq!(r.lookahead_samples, 0);
        assert_eq!(r.receptive_field_samples, 6 + 18 + 6 + 1);
    }

    #[test]
    fn centered_chain_looks_ahead_half_the_kernel() {
        let chain = [ChainLayer::Conv(ConvSpec::new(1, 1, 7).same())];
        let r = chain_latency(&chain, 16_000).unwrap();
        assert_eq!(r.lookahead_samples, 3);
        assert!((r.lookahead_ms - 3.0 * 1000.0 / 16_000.0).abs() < 1e-12);
    }

    #[test]
    fn transposed_span_matches_brute_force() {
        let spec = up_spec(1, 1, 4);
        for o in 0..64i64 {
            let s = Span::point(o).through_transposed(&spec);
            let (st, p, k) = (4i64, spec.pad_left as i64, spec.kernel_size as i64);
            let deps: Vec<i64> = (-20..40).filter(|i| (0..k).contains(&(o + p - i * st))).collect();
            assert_eq!((s.lo, s.hi), (deps[0], *deps.last().unwrap()), "o = {o}");
        }
    }
}
