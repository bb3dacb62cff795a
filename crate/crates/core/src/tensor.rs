//! Dense row-major tensors and 1-D (transposed) convolution.
//!
//! Convolutions follow the cross-correlation convention used by deep-learning
//! frameworks: kernels are not time-reversed, so weights exported from such
//! frameworks can be used as-is.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, shape, Result};

/// Scalar types a [`Tensor`] can hold.
pub trait Element: Copy + Default + PartialEq + std::fmt::Debug + Send + Sync + 'static {
    fn to_f64(self) -> f64;
    fn from_f64(v: f64) -> Self;
}

impl Element for f64 {
    fn to_f64(self) -> f64 {
        self
    }
    fn from_f64(v: f64) -> Self {
        v
    }
}

impl Element for f32 {
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T: Element = f64> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Element> Tensor<T> {
    /// Builds a tensor, checking that extents are positive, that they multiply
    /// out to `data.len()`, and that every entry is finite.
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if shape.contains(&0) {
            return shape_err_zero(&shape);
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return shape_msg(format!("shape {shape:?} holds {n} entries but {} were given", data.len()));
        }
        if let Some(i) = data.iter().position(|v| !v.to_f64().is_finite()) {
            return arg(format!("tensor entry {i} is not finite"));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape.to_vec(), vec![T::default(); n])
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<T>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Row `i` of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[T] {
        assert_eq!(self.rank(), 2, "row() needs a rank-2 tensor");
        let w = self.shape[1];
        &self.data[i * w..(i + 1) * w]
    }

    pub fn map<U: Element>(&self, f: impl Fn(T) -> U) -> Tensor<U> {
        Tensor::from_parts(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn to_f64(&self) -> Tensor<f64> {
        self.map(T::to_f64)
    }

    pub fn to_f32(&self) -> Tensor<f32> {
        self.map(|v| v.to_f64() as f32)
    }
}

impl Tensor<f64> {
    /// Stacks equal-length rows into a `[rows, len]` tensor.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return shape_msg("no rows".into());
        };
        let w = first.len();
        if rows.iter().any(|r| r.len() != w) {
            return shape_msg("rows differ in length".into());
        }
        Self::new(vec![rows.len(), w], rows.concat())
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }
}

fn shape_err_zero<T>(s: &[usize]) -> Result<T> {
    shape(format!("shape {s:?} has a zero extent"))
}

fn shape_msg<T>(msg: String) -> Result<T> {
    shape(msg)
}

/// Geometry of a 1-D convolution layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub dilation: usize,
    pub groups: usize,
    pub pad_left: usize,
    pub pad_right: usize,
}

impl ConvSpec {
    /// Stride 1, dilation 1, one group, no padding.
    pub fn new(in_channels: usize, out_channels: usize, kernel_size: usize) -> Self {
        Self { in_channels, out_channels, kernel_size, stride: 1, dilation: 1, groups: 1, pad_left: 0, pad_right: 0 }
    }

    pub fn stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn dilation(mut self, dilation: usize) -> Self {
        self.dilation = dilation;
        self
    }

    pub fn groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }

    pub fn padding(mut self, left: usize, right: usize) -> Self {
        self.pad_left = left;
        self.pad_right = right;
        self
    }

    /// Symmetric padding that keeps the length unchanged at stride 1.
    pub fn same(mut self) -> Self {
        let total = self.dilation * (self.kernel_size - 1);
        self.pad_left = total / 2;
        self.pad_right = total - total / 2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.in_channels, self.out_channels, self.kernel_size, self.stride, self.dilation, self.groups];
        if fields.contains(&0) {
            return arg(format!("conv spec has a zero field: {self:?}"));
        }
        if self.in_channels % self.groups != 0 || self.out_channels % self.groups != 0 {
            return arg(format!(
                "channels {}→{} not divisible by groups {}",
                self.in_channels, self.out_channels, self.groups
            ));
        }
        Ok(())
    }

    fn span(&self) -> usize {
        self.dilation * (self.kernel_size - 1) + 1
    }

    /// Output length of [`conv1d`], or `None` when the padded input is shorter
    /// than the dilated kernel.
    pub fn output_len(&self, t_in: usize) -> Option<usize> {
        let padded = t_in + self.pad_left + self.pad_right;
        (padded >= self.span()).then(|| (padded - self.span()) / self.stride + 1)
    }

    /// Output length of [`conv1d_transposed`].
    pub fn transposed_output_len(&self, t_in: usize) -> Option<usize> {
        let full = (t_in.checked_sub(1)?) * self.stride + self.span();
        full.checked_sub(self.pad_left + self.pad_right).filter(|&n| n > 0)
    }

    /// Number of weights plus biases.
    pub fn parameter_count(&self) -> usize {
        self.out_channels * (self.in_channels / self.groups) * self.kernel_size + self.out_channels
    }
}

fn check_rank(t: &Tensor, rank: usize, what: &str) -> Result<()> {
    if t.rank() != rank {
        return shape(format!("{what} has rank {} (expected {rank})", t.rank()));
    }
    Ok(())
}

/// Strided, dilated, grouped cross-correlation.
///
/// `input` is `[C_in, T]`, `weight` is `[C_out, C_in / groups, K]`, `bias` is
/// `[C_out]`; the result is `[C_out, T_out]` with
/// `T_out = floor((T + pad_l + pad_r - dilation (K - 1) - 1) / stride) + 1`.
pub fn conv1d(input: &Tensor, weight: &Tensor, bias: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    spec.validate()?;
    check_rank(input, 2, "input")?;
    check_rank(weight, 3, "weight")?;
    check_rank(bias, 1, "bias")?;
    let (c_in, t_in) = (input.shape()[0], input.shape()[1]);
    let cin_g = spec.in_channels / spec.groups;
    let cout_g = spec.out_channels / spec.groups;
    if c_in != spec.in_channels {
        return shape(format!("input has {c_in} channels, spec expects {}", spec.in_channels));
    }
    if weight.shape() != [spec.out_channels, cin_g, spec.kernel_size] {
        return shape(format!(
            "weight shape {:?}, expected {:?}",
            weight.shape(),
            [spec.out_channels, cin_g, spec.kernel_size]
        ));
    }
    if bias.shape() != [spec.out_channels] {
        return shape(format!("bias shape {:?}, expected [{}]", bias.shape(), spec.out_channels));
    }
    let Some(t_out) = spec.output_len(t_in) else {
        return shape(format!("input length {t_in} shorter than the kernel span"));
    };

    let x = input.data();
    let w = weight.data();
    let mut out = vec![0.0; spec.out_channels * t_out];
    let (s, d, pl) = (spec.stride as isize, spec.dilation as isize, spec.pad_left as isize);
    out.par_chunks_exact_mut(t_out).enumerate().for_each(|(co, row)| {
        row.fill(bias.data()[co]);
        let g = co / cout_g;
        for cil in 0..cin_g {
            let xrow = &x[(g * cin_g + cil) * t_in..][..t_in];
            let wk = &w[(co * cin_g + cil) * spec.kernel_size..][..spec.kernel_size];
            for (k, &wv) in wk.iter().enumerate() {
                if wv == 0.0 {
                    continue;
                }
                // input index = t*s + k*d - pl must lie in [0, t_in)
                let off = k as isize * d - pl;
                let t_lo = if off >= 0 { 0 } else { ((-off) + s - 1) / s };
                let t_hi = (t_in as isize - 1 - off).div_euclid(s) + 1;
                let t_hi = t_hi.clamp(0, t_out as isize);
                for t in t_lo..t_hi {
                    row[t as usize] += wv * xrow[(t * s + off) as usize];
                }
            }
        }
    });
    Ok(Tensor::from_parts(vec![spec.out_channels, t_out], out))
}

/// Transposed convolution, the adjoint of [`conv1d`] with the same spec
/// read in reverse.
///
/// `input` is `[C_in, T]`, `weight` is `[C_in, C_out / groups, K]`, `bias` is
/// `[C_out]`; the result is `[C_out, (T - 1) stride + dilation (K - 1) + 1 - pad_l - pad_r]`.
/// With zero bias, `<conv1d(a), b> == <a, conv1d_transposed(b)>` when the
/// transposed spec swaps `in_channels` and `out_channels`.
pub fn conv1d_transposed(input: &Tensor, weight: &Tensor, bias: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    spec.validate()?;
    check_rank(input, 2, "input")?;
    check_rank(weight, 3, "weight")?;
    check_rank(bias, 1, "bias")?;
    let (c_in, t_in) = (input.shape()[0], input.shape()[1]);
    let cin_g = spec.in_channels / spec.groups;
    let cout_g = spec.out_channels / spec.groups;
    if c_in != spec.in_channels {
        return shape(format!("input has {c_in} channels, spec expects {}", spec.in_channels));
    }
    if weight.shape() != [spec.in_channels, cout_g, spec.kernel_size] {
        return shape(format!(
            "weight shape {:?}, expected {:?}",
            weight.shape(),
            [spec.in_channels, cout_g, spec.kernel_size]
        ));
    }
    if bias.shape() != [spec.out_channels] {
        return shape(format!("bias shape {:?}, expected [{}]", bias.shape(), spec.out_channels));
    }
    let Some(t_out) = spec.transposed_output_len(t_in) else {
        return shape(format!("transposed output for length {t_in} would be empty"));
    };

    let x = input.data();
    let w = weight.data();
    let mut out = vec![0.0; spec.out_channels * t_out];
    let (s, d, pl) = (spec.stride as isize, spec.dilation as isize, spec.pad_left as isize);
    out.par_chunks_exact_mut(t_out).enumerate().for_each(|(co, orow)| {
        orow.fill(bias.data()[co]);
        let g = co / cout_g;
        let col = co % cout_g;
        for ci in g * cin_g..(g + 1) * cin_g {
            let xrow = &x[ci * t_in..][..t_in];
            let wk = &w[(ci * cout_g + col) * spec.kernel_size..][..spec.kernel_size];
            for (k, &wv) in wk.iter().enumerate() {
                if wv == 0.0 {
                    continue;
                }
                // output index = t*s + k*d - pl must lie in [0, t_out)
                let off = k as isize * d - pl;
                let t_lo = if off >= 0 { 0 } else { ((-off) + s - 1) / s };
                let t_hi = ((t_out as isize - 1 - off).div_euclid(s) + 1).clamp(0, t_in as isize);
                for t in t_lo..t_hi {
                    orow[(t * s + off) as usize] += wv * xrow[t as usize];
                }
            }
        }
    });
    Ok(Tensor::from_parts(vec![spec.out_channels, t_out], out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro;

    fn rand_tensor(rng: &mut Xoshiro, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
    }

    // Direct transcription of the definition, no index clipping tricks.
    fn conv_reference(x: &Tensor, w: &Tensor, b: &Tensor, spec: &ConvSpec) -> Vec<f64> {
        let t_in = x.shape()[1] as isize;
        let t_out = spec.output_len(x.shape()[1]).unwrap();
        let cin_g = spec.in_channels / spec.groups;
        let cout_g = spec.out_channels / spec.groups;
        let mut out = vec![0.0; spec.out_channels * t_out];
        for co in 0..spec.out_channels {
            for t in 0..t_out {
                let mut acc = b.data()[co];
                for cil in 0..cin_g {
                    let ci = (co / cout_g) * cin_g + cil;
                    for k in 0..spec.kernel_size {
                        let idx = (t * spec.stride + k * spec.dilation) as isize - spec.pad_left as isize;
                        if idx >= 0 && idx < t_in {
                            acc += w.data()[(co * cin_g + cil) * spec.kernel_size + k]
                                * x.data()[ci * t_in as usize + idx as usize];
                        }
                    }
                }
                out[co * t_out + t] = acc;
            }
        }
        out
    }

    #[test]
    fn identity_kernel() {
        let x = Tensor::new(vec![1, 5], vec![1.0, -2.0, 3.0, 0.5, 4.0]).unwrap();
        let w = Tensor::new(vec![1, 1, 1], vec![1.0]).unwrap();
        let b = Tensor::zeros(&[1]).unwrap();
        let spec = ConvSpec::new(1, 1, 1);
        assert_eq!(conv1d(&x, &w, &b, &spec).unwrap(), x);
        assert_eq!(conv1d_transposed(&x, &w, &b, &spec).unwrap(), x);
    }

    #[test]
    fn stride_two_halves_length() {
        let spec = ConvSpec::new(1, 1, 4).stride(2).padding(1, 1);
        assert_eq!(spec.output_len(16), Some(8));
        let t = ConvSpec::new(1, 1, 4).stride(4);
        assert_eq!(t.transposed_output_len(10), Some(40));
    }

    #[test]
    fn matches_triple_loop() {
        let mut rng = Xoshiro::seed_from_u64(7);
        let x = rand_tensor(&mut rng, &[3, 8]);
        let w = rand_tensor(&mut rng, &[2, 3, 3]);
        let b = rand_tensor(&mut rng, &[2]);
        let spec = ConvSpec::new(3, 2, 3).stride(2);
        let got = conv1d(&x, &w, &b, &spec).unwrap();
        let want = conv_reference(&x, &w, &b, &spec);
        for (g, w) in got.data().iter().zip(&want) {
            assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0));
        }
        // grouped, dilated, padded
        let x = rand_tensor(&mut rng, &[4, 19]);
        let w = rand_tensor(&mut rng, &[6, 2, 5]);
        let b = rand_tensor(&mut rng, &[6]);
        let spec = ConvSpec::new(4, 6, 5).stride(3).dilation(2).groups(2).padding(4, 1);
        let got = conv1d(&x, &w, &b, &spec).unwrap();
        let want = conv_reference(&x, &w, &b, &spec);
        assert_eq!(got.shape(), [6, spec.output_len(19).unwrap()]);
        for (g, w) in got.data().iter().zip(&want) {
            assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0));
        }
    }

    #[test]
    fn shape_errors() {
        let x = Tensor::zeros(&[2, 8]).unwrap();
        let w = Tensor::zeros(&[1, 1, 3]).unwrap();
        let b = Tensor::zeros(&[1]).unwrap();
        assert!(conv1d(&x, &w, &b, &ConvSpec::new(2, 1, 3)).is_err());
        assert!(conv1d(&x, &w, &b, &ConvSpec::new(1, 1, 3)).is_err());
        assert!(ConvSpec::new(3, 2, 3).groups(2).validate().is_err());
        assert!(Tensor::<f64>::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::<f64>::new(vec![0], vec![]).is_err());
    }
}
