//! Writes the synthetic speech corpus and its degraded versions as float32
//! WAV files plus a `reference,estimate` manifest, and a 10 s utterance
//! paired with equal-power white noise (`noise.csv`).
//!
//!     cargo run -p eben-core --example export_fixtures -- <dir> [count] [seconds] [seed]

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use eben_core::degrade::{degrade, DegradationConfig};
use eben_core::rng::Xoshiro;
use eben_core::signal::Signal;
use eben_core::signal::{write_wav, WavEncoding};
use eben_core::synth::{corpus, speech, SpeechConfig};

fn main() -> eben_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "fixtures".into()));
    let count: usize = args.next().map_or(20, |v| v.parse().expect("count"));
    let seconds: f64 = args.next().map_or(4.0, |v| v.parse().expect("seconds"));
    let seed: u64 = args.next().map_or(1000, |v| v.parse().expect("seed"));
    fs::create_dir_all(&dir)?;
    let mut manifest = fs::File::create(dir.join("manifest.csv"))?;
    writeln!(manifest, "reference,estimate")?;
    for (i, clean) in corpus(count, seconds, seed)?.iter().enumerate() {
        let degraded = degrade(clean, &DegradationConfig::with_seed(seed + i as u64))?;
        let c = format!("clean_{i:02}.wav");
        let d = format!("degraded_{i:02}.wav");
        write_wav(clean, dir.join(&c), WavEncoding::Float32)?;
        write_wav(&degraded, dir.join(&d), WavEncoding::Float32)?;
        writeln!(manifest, "{c},{d}")?;
    }

    // a 10 s utterance against independent noise of equal power
    let long = speech(&SpeechConfig::new(10.0, seed))?;
    let sigma = long.power().sqrt();
    let mut rng = Xoshiro::seed_from_u64(seed ^ 0x9e37_79b9);
    let noise = Signal::new((0..long.len()).map(|_| sigma * rng.gaussian()).collect(), long.sample_rate_hz())?;
    write_wav(&long, dir.join("long_clean.wav"), WavEncoding::Float32)?;
    write_wav(&noise, dir.join("long_noise.wav"), WavEncoding::Float32)?;
    fs::write(dir.join("noise.csv"), "reference,estimate\nlong_clean.wav,long_noise.wav\n")?;
    Ok(())
}
