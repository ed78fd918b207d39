//! Sampled dual-polarization waveforms and their disk format.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Complex baseband samples for both polarizations at a common rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    pub sample_rate_hz: f64,
}

impl Waveform {
    pub fn new(x: Vec<Complex64>, y: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                expected: x.len(),
                got: y.len(),
                context: "waveform polarizations",
            });
        }
        Ok(Self { x, y, sample_rate_hz })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Time-averaged power summed over both polarizations (W).
    pub fn total_power(&self) -> f64 {
        let e: f64 = self
            .x
            .iter()
            .zip(&self.y)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .sum();
        e / self.len() as f64
    }

    /// Writes raw interleaved little-endian f64 `[x_re, x_im, y_re, y_im]`
    /// per sample, plus a JSON sidecar at `<path>.json`.
    pub fn save(&self, path: &Path, sidecar: &WaveformSidecar) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (a, b) in self.x.iter().zip(&self.y) {
            for v in [a.re, a.im, b.re, b.im] {
                f.write_all(&v.to_le_bytes())?;
            }
        }
        f.flush()?;
        let mut meta = sidecar.clone();
        meta.version = WaveformSidecar::VERSION;
        meta.sample_rate_hz = self.sample_rate_hz;
        meta.n_samples = self.len();
        std::fs::write(path.with_extension("json"), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, WaveformSidecar)> {
        let sidecar: WaveformSidecar =
            serde_json::from_str(&std::fs::read_to_string(path.with_extension("json"))?)?;
        if sidecar.version != WaveformSidecar::VERSION {
            return Err(Error::Serde(format!(
                "waveform sidecar version {} unsupported",
                sidecar.version
            )));
        }
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() != sidecar.n_samples * 32 {
            return Err(Error::Serde("waveform payload size mismatch".into()));
        }
        let mut x = Vec::with_capacity(sidecar.n_samples);
        let mut y = Vec::with_capacity(sidecar.n_samples);
        for chunk in bytes.chunks_exact(32) {
            let v: Vec<f64> = chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect();
            x.push(Complex64::new(v[0], v[1]));
            y.push(Complex64::new(v[2], v[3]));
        }
        let wave = Waveform::new(x, y, sidecar.sample_rate_hz)?;
        Ok((wave, sidecar))
    }
}

/// Metadata stored beside the raw samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveformSidecar {
    #[serde(default)]
    pub version: u32,
    #[serde(default)]
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub n_samples: usize,
    pub channel_offsets: Vec<i32>,
    pub seed: u64,
}

impl WaveformSidecar {
    pub const VERSION: u32 = 1;
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn save_load_round_trip() {
        let wave = Waveform::new(
            vec![Complex64::new(1.0, -2.0), Complex64::new(0.25, 1e-300)],
            vec![Complex64::new(0.0, 0.0), Complex64::new(-1.5, 3.25)],
            64e9,
        )
        .unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("wave.f64");
        let sidecar = WaveformSidecar {
            version: 0,
            sample_rate_hz: 0.0,
            n_samples: 0,
            channel_offsets: vec![-1, 0, 1],
            seed: 99,
        };
        wave.save(&path, &sidecar).unwrap();
        let (back, meta) = Waveform::load(&path).unwrap();
        assert_eq!(back, wave);
        assert_eq!(meta.channel_offsets, vec![-1, 0, 1]);
        assert_eq!(meta.seed, 99);
        assert_eq!(meta.sample_rate_hz, 64e9);
    }
}
