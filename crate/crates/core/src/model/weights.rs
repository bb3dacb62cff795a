//! Named f32 tensors and their on-disk format.
//!
//! Layout (little-endian): magic `EBWT`, `u32` version, `u32` entry count;
//! per entry a `u16` name length, the UTF-8 name, a `u8` rank and `rank`
//! `u32` extents; then every payload as f32 in entry order; finally a CRC32
//! of everything after the magic.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::Xoshiro;
use crate::tensor::{ConvSpec, Tensor};

pub const MAGIC: &[u8; 4] = b"EBWT";
pub const VERSION: u32 = 1;

fn load_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Load(msg.into()))
}

/// Name and shape of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    /// Fan-in used by seeded initialization.
    pub fan_in: usize,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Weight and bias of a convolution named `prefix`.
    pub(crate) fn conv(prefix: &str, spec: &ConvSpec, transposed: bool) -> [ParamSpec; 2] {
        let (w, fan_in) = if transposed {
            let cout_g = spec.out_channels / spec.groups;
            (vec![spec.in_channels, cout_g, spec.kernel_size], cout_g * spec.kernel_size)
        } else {
            let cin_g = spec.in_channels / spec.groups;
            (vec![spec.out_channels, cin_g, spec.kernel_size], cin_g * spec.kernel_size)
        };
        [
            ParamSpec { name: format!("{prefix}.weight"), shape: w, fan_in },
            ParamSpec { name: format!("{prefix}.bias"), shape: vec![spec.out_channels], fan_in },
        ]
    }
}

/// Ordered, name-unique collection of f32 tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightStore {
    entries: Vec<(String, Tensor<f32>)>,
    index: HashMap<String, usize>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<f32>) -> Result<()> {
        let name = name.into();
        if name.len() > usize::from(u16::MAX) {
            return Err(Error::Argument(format!("weight name of {} bytes is too long", name.len())));
        }
        if tensor.rank() > usize::from(u8::MAX) || tensor.shape().iter().any(|&d| d > u32::MAX as usize) {
            return Err(Error::Argument(format!("{name}: shape {:?} not representable", tensor.shape())));
        }
        if self.index.contains_key(&name) {
            return Err(Error::Argument(format!("duplicate weight name {name:?}")));
        }
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push((name, tensor));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<f32>> {
        self.index.get(name).map(|&i| &self.entries[i].1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<f32>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    /// Total number of scalars.
    pub fn parameter_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// Sum of scalars under names starting with `prefix`.
    pub fn parameter_count_with_prefix(&self, prefix: &str) -> usize {
        self.iter().filter(|(n, _)| n.starts_with(prefix)).map(|(_, t)| t.len()).sum()
    }

    /// Tensor `name` as f64, checked against `shape`.
    pub fn fetch(&self, name: &str, shape: &[usize]) -> Result<Tensor> {
        match self.get(name) {
            None => load_err(format!("missing weight {name:?}")),
            Some(t) if t.shape() != shape => {
                load_err(format!("weight {name:?} has shape {:?}, expected {shape:?}", t.shape()))
            }
            Some(t) => Ok(t.to_f64()),
        }
    }

    /// Seeded uniform initialization in `±1/sqrt(fan_in)` for every spec.
    pub fn seeded(specs: &[ParamSpec], seed: u64) -> Result<Self> {
        let mut rng = Xoshiro::seed_from_u64(seed);
        let mut store = Self::new();
        for spec in specs {
            let bound = 1.0 / (spec.fan_in.max(1) as f64).sqrt();
            let data = (0..spec.len()).map(|_| rng.uniform(-bound, bound) as f32).collect();
            store.insert(spec.name.clone(), Tensor::new(spec.shape.clone(), data)?)?;
        }
        Ok(store)
    }

    /// Every spec filled with zeros.
    pub fn zeros(specs: &[ParamSpec]) -> Result<Self> {
        let mut store = Self::new();
        for spec in specs {
            store.insert(spec.name.clone(), Tensor::zeros(&spec.shape)?)?;
        }
        Ok(store)
    }

    /// Checks that every spec is present with the right shape and nothing
    /// else is.
    pub fn check_layout(&self, specs: &[ParamSpec]) -> Result<()> {
        for spec in specs {
            self.fetch_shape(&spec.name, &spec.shape)?;
        }
        if self.len() != specs.len() {
            let known: std::collections::HashSet<&str> = specs.iter().map(|s| s.name.as_str()).collect();
            let extra: Vec<&str> = self.iter().map(|(n, _)| n).filter(|n| !known.contains(n)).collect();
            return load_err(format!("unexpected weights: {}", extra.join(", ")));
        }
        Ok(())
    }

    fn fetch_shape(&self, name: &str, shape: &[usize]) -> Result<()> {
        match self.get(name) {
            None => load_err(format!("missing weight {name:?}")),
            Some(t) if t.shape() != shape => {
                load_err(format!("weight {name:?} has shape {:?}, expected {shape:?}", t.shape()))
            }
            Some(_) => Ok(()),
        }
    }

    /// Selects the entries whose names start with `prefix`.
    pub fn subset(&self, prefix: &str) -> Self {
        let mut out = Self::new();
        for (n, t) in self.iter().filter(|(n, _)| n.starts_with(prefix)) {
            out.insert(n, t.clone()).expect("names unique in source");
        }
        out
    }

    /// Appends all entries of `other`.
    pub fn extend(&mut self, other: WeightStore) -> Result<()> {
        for (n, t) in other.entries {
            self.insert(n, t)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut body = Vec::new();
        body.extend_from_slice(&VERSION.to_le_bytes());
        body.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, t) in &self.entries {
            body.extend_from_slice(&(name.len() as u16).to_le_bytes());
            body.extend_from_slice(name.as_bytes());
            body.push(t.rank() as u8);
            for &d in t.shape() {
                body.extend_from_slice(&(d as u32).to_le_bytes());
            }
        }
        for (_, t) in &self.entries {
            for v in t.data() {
                body.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&body);
        let mut out = Vec::with_capacity(body.len() + 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&body);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return load_err("bad magic; not an EBWT weights file");
        }
        let mut r = Reader { buf: &bytes[4..], pos: 0 };
        let version = r.u32()?;
        if version != VERSION {
            return load_err(format!("unsupported version {version}"));
        }
        let count = r.u32()? as usize;
        let mut headers = Vec::with_capacity(count.min(1 << 16));
        let mut scalars = 0usize;
        for _ in 0..count {
            let n = usize::from(r.u16()?);
            let name = std::str::from_utf8(r.take(n)?)
                .map_err(|_| Error::Load("weight name is not UTF-8".into()))?
                .to_string();
            let rank = usize::from(r.u8()?);
            let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .and_then(|n| scalars.checked_add(n))
                .ok_or_else(|| Error::Load(format!("{name:?}: shape {shape:?} overflows")))?;
            scalars = n;
            headers.push((name, shape));
        }
        let expected = scalars.checked_mul(4).and_then(|p| p.checked_add(4));
        match expected {
            Some(e) if e == r.remaining() => {}
            Some(e) if e > r.remaining() => return load_err("truncated file"),
            _ => return load_err(format!("{} unexpected trailing bytes", r.remaining() - expected.unwrap_or(0))),
        }
        let body = &bytes[4..bytes.len() - 4];
        let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let mut store = Self::new();
        for (name, shape) in headers {
            let n: usize = shape.iter().product();
            let data =
                r.take(4 * n)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
            let t = Tensor::new(shape, data).map_err(|e| Error::Load(format!("{name:?}: {e}")))?;
            if store.index.contains_key(&name) {
                return load_err(format!("duplicate weight name {name:?}"));
            }
            store.insert(name, t)?;
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return load_err("truncated file");
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}
