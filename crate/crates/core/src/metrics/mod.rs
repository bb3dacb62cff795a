//! Objective speech metrics: SI-SDR and STOI, plus batch evaluation over
//! file pairs with median / interquartile-range summaries.

mod resample;
mod si_sdr;
mod stoi;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{read_wav, Signal};

pub use resample::{resample, TAPS_PER_PHASE};
pub use si_sdr::{si_sdr, si_sdr_slices, SI_SDR_CAP_DB};
pub use stoi::{stoi, stoi_detailed, StoiDetail, STOI_RATE_HZ};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    SiSdr,
    Stoi,
}

impl MetricKind {
    pub const ALL: [MetricKind; 2] = [MetricKind::SiSdr, MetricKind::Stoi];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::SiSdr => "si-sdr",
            MetricKind::Stoi => "stoi",
        }
    }

    pub fn evaluate(self, reference: &Signal, estimate: &Signal) -> Result<MetricReport> {
        match self {
            MetricKind::SiSdr => {
                let v = si_sdr(reference, estimate)?;
                let capped = v.abs() >= SI_SDR_CAP_DB;
                Ok(MetricReport {
                    name: self.name().into(),
                    value: v,
                    valid: true,
                    detail: capped.then(|| "capped".to_string()),
                })
            }
            MetricKind::Stoi => {
                let d = stoi_detailed(reference, estimate)?;
                Ok(MetricReport {
                    name: self.name().into(),
                    value: d.score,
                    valid: true,
                    detail: Some(format!("frames kept {}/{}, segments {}", d.frames_kept, d.frames_total, d.segments)),
                })
            }
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "si-sdr" | "sisdr" => Ok(MetricKind::SiSdr),
            "stoi" => Ok(MetricKind::Stoi),
            _ => Err(Error::Argument(format!("unknown metric {s:?}"))),
        }
    }
}

/// One metric value. Invalid rows carry NaN and the failure in `detail`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub name: String,
    pub value: f64,
    pub valid: bool,
    pub detail: Option<String>,
}

impl MetricReport {
    pub fn failed(kind: MetricKind, err: &Error) -> Self {
        MetricReport { name: kind.name().into(), value: f64::NAN, valid: false, detail: Some(err.to_string()) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRow {
    pub reference: PathBuf,
    pub estimate: PathBuf,
    pub report: MetricReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub iqr: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchTable {
    pub rows: Vec<BatchRow>,
}

/// Load a pair, trimming both to the shorter length.
pub fn load_pair(reference: &Path, estimate: &Path) -> Result<(Signal, Signal)> {
    let r = read_wav(reference)?;
    let e = read_wav(estimate)?;
    if r.sample_rate_hz() != e.sample_rate_hz() {
        return Err(Error::Argument(format!(
            "sample rates differ: {} Hz vs {} Hz",
            r.sample_rate_hz(),
            e.sample_rate_hz()
        )));
    }
    if r.len() != e.len() {
        log::warn!(
            "{} and {} differ in length ({} vs {}); trimming to the shorter",
            reference.display(),
            estimate.display(),
            r.len(),
            e.len()
        );
        let n = r.len().min(e.len());
        return Ok((r.truncated(n), e.truncated(n)));
    }
    Ok((r, e))
}

/// Evaluate every metric on every pair. Pairs run in parallel; rows come
/// back in input order, pair-major. Failures become invalid rows.
pub fn batch_evaluate<P: AsRef<Path> + Sync>(pairs: &[(P, P)], metrics: &[MetricKind]) -> BatchTable {
    let rows = pairs
        .par_iter()
        .map(|(r, e)| {
            let (r, e) = (r.as_ref(), e.as_ref());
            let row = |report| BatchRow { reference: r.to_path_buf(), estimate: e.to_path_buf(), report };
            match load_pair(r, e) {
                Ok((rs, es)) => metrics
                    .iter()
                    .map(|&m| row(m.evaluate(&rs, &es).unwrap_or_else(|err| MetricReport::failed(m, &err))))
                    .collect(),
                Err(err) => {
                    log::warn!("{}: {err}", r.display());
                    metrics.iter().map(|&m| row(MetricReport::failed(m, &err))).collect::<Vec<_>>()
                }
            }
        })
        .collect::<Vec<Vec<_>>>()
        .into_iter()
        .flatten()
        .collect();
    BatchTable { rows }
}

impl BatchTable {
    pub fn values(&self, metric: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.report.valid && r.report.name == metric).map(|r| r.report.value).collect()
    }

    /// Median and IQR per metric over the valid rows.
    pub fn summary(&self) -> BTreeMap<String, Summary> {
        let mut names: Vec<&str> = self.rows.iter().map(|r| r.report.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        names
            .into_iter()
            .map(|n| {
                let v = self.values(n);
                let s = Summary { median: quantile(&v, 0.5), iqr: quantile(&v, 0.75) - quantile(&v, 0.25), n: v.len() };
                (n.to_string(), s)
            })
            .collect()
    }

    /// CSV with header `ref,est,metric,value,valid`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        out.write_record(["ref", "est", "metric", "value", "valid"]).map_err(csv_err)?;
        for r in &self.rows {
            out.write_record([
                r.reference.display().to_string(),
                r.estimate.display().to_string(),
                r.report.name.clone(),
                if r.report.valid { format!("{}", r.report.value) } else { String::new() },
                r.report.valid.to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Linearly interpolated quantile; NaN for an empty slice.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Read a `reference,estimate` manifest. Relative paths resolve against
/// the manifest's directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<(PathBuf, PathBuf)>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["reference", "estimate"] {
        return Err(Error::Format(format!("{}: expected header `reference,estimate`", path.display())));
    }
    let mut pairs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("{} row {}: {e}", path.display(), i + 2)))?;
        if rec.len() != 2 {
            return Err(Error::Format(format!("{} row {}: expected 2 fields", path.display(), i + 2)));
        }
        let resolve = |s: &str| {
            let p = PathBuf::from(s.trim());
            if p.is_relative() {
                base.join(p)
            } else {
                p
            }
        };
        pairs.push((resolve(&rec[0]), resolve(&rec[1])));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro;
    use crate::signal::{write_wav, WavEncoding};

    #[test]
    fn quantiles_interpolate() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 0.75), 3.25);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn empty_batch_is_empty() {
        let pairs: Vec<(PathBuf, PathBuf)> = Vec::new();
        let t = batch_evaluate(&pairs, &MetricKind::ALL);
        assert!(t.rows.is_empty());
        assert!(t.summary().is_empty());
    }

    #[test]
    fn identical_pair_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.wav");
        let x = Signal::new(Xoshiro::seed_from_u64(5).gaussian_vec(16_000).iter().map(|v| 0.1 * v).collect(), 16_000)
            .unwrap();
        write_wav(&x, &a, WavEncoding::Float32).unwrap();
        let missing = dir.path().join("missing.wav");
        let pairs = vec![(a.clone(), a.clone()), (a.clone(), missing)];
        let t = batch_evaluate(&pairs, &MetricKind::ALL);
        assert_eq!(t.rows.len(), 4);
        assert_eq!(t.rows[0].report.value, SI_SDR_CAP_DB);
        assert!((t.rows[1].report.value - 1.0).abs() < 1e-9);
        assert!(!t.rows[2].report.valid && !t.rows[3].report.valid);
        let s = t.summary();
        assert_eq!(s["stoi"].n, 1);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("ref,est,metric,value,valid\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
