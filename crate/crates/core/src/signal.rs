//! Mono sample buffers and WAV file I/O.
//!
//! PCM16 decodes as `v / 32768` and encodes as `round(x * 32768)` clamped to
//! `[-32768, 32767]`, so `1.0` saturates to `32767` and a round trip is off
//! by at most one quantization step. Float32 files round-trip bit-exactly for
//! samples that are representable in `f32`.

use std::io;
use std::path::Path;

use crate::error::{arg, Error, Result};

/// A mono sequence of finite samples at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return arg("sample rate must be positive");
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return arg(format!("sample {i} is not finite"));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    pub fn zeros(len: usize, sample_rate_hz: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate_hz)
    }

    /// Internal constructor for results that are finite by construction.
    pub(crate) fn from_parts(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        debug_assert!(sample_rate_hz > 0);
        debug_assert!(samples.iter().all(|s| s.is_finite()));
        Self { samples, sample_rate_hz }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Mean square amplitude; zero for an empty signal.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.energy() / self.samples.len() as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    pub fn scaled(&self, gain: f64) -> Result<Self> {
        Self::new(self.samples.iter().map(|s| s * gain).collect(), self.sample_rate_hz)
    }

    /// Copy of the first `len` samples (or all of them when shorter).
    pub fn truncated(&self, len: usize) -> Self {
        let n = len.min(self.samples.len());
        Self::from_parts(self.samples[..n].to_vec(), self.sample_rate_hz)
    }
}

/// On-disk sample encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

impl std::str::FromStr for WavEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pcm16" => Ok(Self::Pcm16),
            "float32" => Ok(Self::Float32),
            other => arg(format!("unknown encoding {other:?} (expected pcm16 or float32)")),
        }
    }
}

pub fn pcm16_to_sample(v: i16) -> f64 {
    f64::from(v) / 32768.0
}

pub fn sample_to_pcm16(x: f64) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

fn map_hound(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) if io.kind() == io::ErrorKind::UnexpectedEof => {
            Error::Format("truncated data chunk".into())
        }
        hound::Error::IoError(io) => Error::Io(io),
        hound::Error::FormatError(msg) => Error::Format(msg.into()),
        hound::Error::Unsupported => Error::Unsupported("WAV feature not supported".into()),
        hound::Error::TooWide => Error::Unsupported("sample width too large".into()),
        hound::Error::UnfinishedSample => Error::Format("data chunk ends mid-sample".into()),
        hound::Error::InvalidSampleFormat => Error::Unsupported("invalid sample format".into()),
    }
}

/// Reads a mono PCM16 or float32 WAV file. Multi-channel files are rejected;
/// use [`read_wav_channel`] to pick one channel explicitly.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Signal> {
    read_wav_impl(path.as_ref(), None)
}

/// Reads channel `channel` (0-based) of a PCM16 or float32 WAV file.
pub fn read_wav_channel(path: impl AsRef<Path>, channel: u16) -> Result<Signal> {
    read_wav_impl(path.as_ref(), Some(channel))
}

fn read_wav_impl(path: &Path, channel: Option<u16>) -> Result<Signal> {
    let mut reader = hound::WavReader::open(path).map_err(map_hound)?;
    let spec = reader.spec();
    let channels = spec.channels;
    let pick = match channel {
        None if channels != 1 => {
            return Err(Error::Unsupported(format!("{channels}-channel file; select a channel explicitly")))
        }
        None => 0,
        Some(c) if c >= channels => return arg(format!("channel {c} out of range for {channels}-channel file")),
        Some(c) => c,
    };
    let stride = usize::from(channels);
    let pick = usize::from(pick);
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .enumerate()
            .filter(|(i, _)| i % stride == pick)
            .map(|(_, s)| s.map(pcm16_to_sample).map_err(map_hound))
            .collect::<Result<_>>()?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .enumerate()
            .filter(|(i, _)| i % stride == pick)
            .map(|(_, s)| s.map(f64::from).map_err(map_hound))
            .collect::<Result<_>>()?,
        (fmt, bits) => {
            return Err(Error::Unsupported(format!(
                "{bits}-bit {fmt:?} encoding (expected 16-bit PCM or 32-bit float)"
            )))
        }
    };
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::Format("non-finite float sample".into()));
    }
    Signal::new(samples, spec.sample_rate)
}

pub fn write_wav(signal: &Signal, path: impl AsRef<Path>, encoding: WavEncoding) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate_hz(),
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => hound::SampleFormat::Int,
            WavEncoding::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(map_hound)?;
    for &s in signal.samples() {
        match encoding {
            WavEncoding::Pcm16 => writer.write_sample(sample_to_pcm16(s)),
            WavEncoding::Float32 => writer.write_sample(s as f32),
        }
        .map_err(map_hound)?;
    }
    writer.finalize().map_err(map_hound)
}
