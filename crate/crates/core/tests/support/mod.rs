//! Straight-line reference implementations shared by the integration
//! tests. Nothing here calls into the convolution or network code under
//! test; layer geometry is re-derived from the configuration fields.
#![allow(dead_code, clippy::needless_range_loop)]

use std::f64::consts::PI;

use eben_core::model::{DiscriminatorConfig, GeneratorConfig, WeightStore};
use eben_core::pqmf::PqmfBank;

pub type Channels = Vec<Vec<f64>>;

fn param(store: &WeightStore, name: &str) -> (Vec<usize>, Vec<f64>) {
    let t = store.get(name).unwrap_or_else(|| panic!("missing {name}"));
    (t.shape().to_vec(), t.data().iter().map(|&v| f64::from(v)).collect())
}

/// Cross-correlation with zero padding; weight `[Cout, Cin/g, K]`.
#[allow(clippy::too_many_arguments)]
pub fn conv(
    x: &Channels,
    store: &WeightStore,
    name: &str,
    stride: usize,
    dilation: usize,
    groups: usize,
    pad_left: usize,
    pad_right: usize,
) -> Channels {
    let (ws, w) = param(store, &format!("{name}.weight"));
    let (_, b) = param(store, &format!("{name}.bias"));
    let (cout, cin_g, k) = (ws[0], ws[1], ws[2]);
    let t_in = x[0].len();
    let padded = t_in + pad_left + pad_right;
    let span = dilation * (k - 1) + 1;
    let t_out = (padded - span) / stride + 1;
    let cout_g = cout / groups;
    let mut y = vec![vec![0.0; t_out]; cout];
    for co in 0..cout {
        let g = co / cout_g;
        for t in 0..t_out {
            let mut acc = b[co];
            for ci in 0..cin_g {
                for kk in 0..k {
                    let pos = (t * stride + kk * dilation) as isize - pad_left as isize;
                    if pos >= 0 && (pos as usize) < t_in {
                        acc += w[(co * cin_g + ci) * k + kk] * x[g * cin_g + ci][pos as usize];
                    }
                }
            }
            y[co][t] = acc;
        }
    }
    y
}

/// Transposed convolution, groups 1; weight `[Cin, Cout, K]`.
pub fn conv_transposed(
    x: &Channels,
    store: &WeightStore,
    name: &str,
    stride: usize,
    pad_left: usize,
    pad_right: usize,
) -> Channels {
    let (ws, w) = param(store, &format!("{name}.weight"));
    let (_, b) = param(store, &format!("{name}.bias"));
    let (cin, cout, k) = (ws[0], ws[1], ws[2]);
    let t_in = x[0].len();
    let full = (t_in - 1) * stride + k;
    let t_out = full - pad_left - pad_right;
    let mut y = vec![vec![0.0; t_out]; cout];
    for co in 0..cout {
        for o in 0..t_out {
            let mut acc = b[co];
            let q = o + pad_left;
            for ci in 0..cin {
                for i in 0..t_in {
                    if q >= i * stride && q - i * stride < k {
                        acc += w[(ci * cout + co) * k + (q - i * stride)] * x[ci][i];
                    }
                }
            }
            y[co][o] = acc;
        }
    }
    y
}

pub fn apply(x: &Channels, f: impl Fn(f64) -> f64) -> Channels {
    x.iter().map(|r| r.iter().map(|&v| f(v)).collect()).collect()
}

pub fn plus(a: &Channels, b: &Channels) -> Channels {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect()).collect()
}

pub fn elu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        v.exp() - 1.0
    }
}

fn modulated(bank: &PqmfBank, band: usize, sign: f64) -> Vec<f64> {
    let p = bank.prototype();
    let m = bank.num_bands() as f64;
    let mid = (p.len() - 1) as f64 / 2.0;
    let phi = if band % 2 == 0 { PI / 4.0 } else { -PI / 4.0 };
    (0..p.len())
        .map(|n| 2.0 * p[n] * ((2 * band + 1) as f64 * PI / (2.0 * m) * (n as f64 - mid) + sign * phi).cos())
        .collect()
}

/// PQMF analysis by direct convolution with the modulated prototype.
pub fn pqmf_analysis(bank: &PqmfBank, x: &[f64]) -> Channels {
    let m = bank.num_bands();
    let n = bank.prototype().len();
    let pad = (n - m) / 2;
    let l = x.len() / m;
    (0..m)
        .map(|i| {
            let h = modulated(bank, i, 1.0);
            (0..l)
                .map(|j| {
                    (0..n)
                        .filter_map(|k| {
                            let pos = (m * j + k) as isize - pad as isize;
                            (pos >= 0 && (pos as usize) < x.len()).then(|| x[pos as usize] * h[n - 1 - k])
                        })
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// PQMF synthesis: upsample, filter with the synthesis kernels, scale by M.
pub fn pqmf_synthesis(bank: &PqmfBank, bands: &Channels) -> Vec<f64> {
    let m = bank.num_bands();
    let n = bank.prototype().len();
    let pad = (n - m) / 2;
    let l = bands[0].len();
    let mut y = vec![0.0; m * l];
    for (i, band) in bands.iter().enumerate() {
        let g = modulated(bank, i, -1.0);
        for (o, out) in y.iter_mut().enumerate() {
            let q = o + pad;
            for (j, &v) in band.iter().enumerate() {
                if q >= m * j && q - m * j < n {
                    *out += m as f64 * g[q - m * j] * v;
                }
            }
        }
    }
    y
}

fn residuals(store: &WeightStore, cfg: &GeneratorConfig, prefix: &str, mut h: Channels) -> Channels {
    for (j, &d) in cfg.residual_dilations.iter().enumerate() {
        let a = conv(&apply(&h, elu), store, &format!("{prefix}.res{j}.dilated"), 1, d, 1, d, d);
        let a = conv(&apply(&a, elu), store, &format!("{prefix}.res{j}.pointwise"), 1, 1, 1, 0, 0);
        h = plus(&h, &a);
    }
    h
}

/// Analysis, U-Net, synthesis, written out layer by layer.
pub fn generator(store: &WeightStore, cfg: &GeneratorConfig, bank: &PqmfBank, x: &[f64]) -> Vec<f64> {
    let half = cfg.kernel_size / 2;
    let bands = pqmf_analysis(bank, x);
    let input: Channels = bands[..cfg.bands_to_generator].to_vec();
    let mut h = conv(&input, store, "generator.input", 1, 1, 1, half, half);
    let mut skips = Vec::new();
    for (i, &s) in cfg.encoder_strides.iter().enumerate() {
        skips.push(h.clone());
        let r = residuals(store, cfg, &format!("generator.encoder{i}"), h);
        h = conv(&apply(&r, elu), store, &format!("generator.encoder{i}.down"), s, 1, 1, s.div_ceil(2), s / 2);
    }
    let z = conv(&apply(&h, elu), store, "generator.bottleneck.in", 1, 1, 1, half, half);
    let b = conv(&apply(&z, elu), store, "generator.bottleneck.out", 1, 1, 1, half, half);
    h = plus(&b, &h);
    for (i, &s) in cfg.encoder_strides.iter().enumerate().rev() {
        let u = conv_transposed(&apply(&h, elu), store, &format!("generator.decoder{i}.up"), s, s.div_ceil(2), s / 2);
        let u = residuals(store, cfg, &format!("generator.decoder{i}"), u);
        h = plus(&u, &skips.pop().unwrap());
    }
    let y = conv(&apply(&h, elu), store, "generator.output", 1, 1, 1, half, half);
    pqmf_synthesis(bank, &apply(&y, f64::tanh))
}

/// Scale `k`: returns every layer's activations, logits last.
pub fn discriminator(store: &WeightStore, cfg: &DiscriminatorConfig, k: usize, x: &[f64]) -> Vec<Channels> {
    let stages = if k == 0 { cfg.full_scale_stages } else { cfg.band_stages };
    let leaky = |v: f64| if v >= 0.0 { v } else { cfg.leaky_slope * v };
    let mut h: Channels = vec![x.to_vec()];
    let mut out = Vec::new();
    let layers = stages + 3;
    for l in 0..layers {
        let name = format!("discriminator{k}.layer{l}");
        h = if l == 0 {
            let p = cfg.first_kernel / 2;
            conv(&h, store, &name, 1, 1, 1, p, p)
        } else if l <= stages {
            let p = cfg.stage_kernel / 2;
            conv(&h, store, &name, cfg.stage_stride, 1, cfg.stage_groups, p, p)
        } else if l == stages + 1 {
            let p = cfg.post_kernel / 2;
            conv(&h, store, &name, 1, 1, 1, p, p)
        } else {
            let p = cfg.output_kernel / 2;
            conv(&h, store, &name, 1, 1, 1, p, p)
        };
        if l + 1 < layers {
            h = apply(&h, leaky);
        }
        out.push(h.clone());
    }
    out
}

/// Brute-force hinge and feature-matching losses over nested vectors
/// `[scale][layer][channel][time]`; the last layer holds the logits.
pub fn loss_d(real: &[Vec<Channels>], fake: &[Vec<Channels>]) -> f64 {
    let k = real.len() as f64;
    let mut a = 0.0;
    let mut b = 0.0;
    for (r, f) in real.iter().zip(fake) {
        let rl = &r.last().unwrap()[0];
        let fl = &f.last().unwrap()[0];
        let mut sa = 0.0;
        for t in 0..rl.len() {
            sa += f64::max(0.0, 1.0 - rl[t]);
        }
        let mut sb = 0.0;
        for t in 0..fl.len() {
            sb += f64::max(0.0, 1.0 + fl[t]);
        }
        a += sa / rl.len() as f64;
        b += sb / fl.len() as f64;
    }
    a / k + b / k
}

pub fn loss_g_adv(fake: &[Vec<Channels>]) -> f64 {
    let mut s = 0.0;
    for f in fake {
        let fl = &f.last().unwrap()[0];
        let mut acc = 0.0;
        for t in 0..fl.len() {
            acc += f64::max(0.0, 1.0 - fl[t]);
        }
        s += acc / fl.len() as f64;
    }
    s / fake.len() as f64
}

pub fn loss_g_rec(real: &[Vec<Channels>], fake: &[Vec<Channels>]) -> f64 {
    let mut s = 0.0;
    for (r, f) in real.iter().zip(fake) {
        for l in 0..r.len() - 1 {
            let (ch, t_len) = (r[l].len(), r[l][0].len());
            let mut acc = 0.0;
            for t in 0..t_len {
                let mut norm = 0.0;
                for c in 0..ch {
                    norm += (r[l][c][t] - f[l][c][t]).abs();
                }
                acc += norm;
            }
            s += acc / (t_len * ch) as f64;
        }
    }
    s / real.len() as f64
}
