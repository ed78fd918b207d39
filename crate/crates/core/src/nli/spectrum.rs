//! Welch-averaged spectra of symbol-energy sequences.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rustfft::FftPlanner;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
    Rect,
}

#[derive(Debug, Clone, Copy)]
pub struct WelchConfig {
    pub segment_len: usize,
    /// Fractional overlap between segments, e.g. 0.5.
    pub overlap: f64,
    pub window: Window,
    pub sample_rate_hz: f64,
}

impl WelchConfig {
    pub fn new(segment_len: usize, sample_rate_hz: f64) -> Self {
        Self {
            segment_len,
            overlap: 0.5,
            window: Window::Hann,
            sample_rate_hz,
        }
    }
}

/// Two-sided averaged magnitude spectrum, DC-centered.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub freq_hz: Vec<f64>,
    pub power_db: Vec<f64>,
    pub num_segments: usize,
}

/// Welch-averaged magnitude spectrum in dB of a real sequence (typically a
/// mean-removed symbol-energy sequence at one sample per symbol).
pub fn energy_spectrum(x: &[f64], cfg: &WelchConfig) -> Result<Spectrum> {
    let n = cfg.segment_len;
    if x.is_empty() {
        return Err(Error::Domain("empty input".into()));
    }
    if n == 0 || x.len() < n {
        return Err(Error::Domain(format!(
            "need at least one segment of {n} samples, got {}",
            x.len()
        )));
    }
    if !(0.0..1.0).contains(&cfg.overlap) {
        return Err(Error::Domain("overlap must be in [0, 1)".into()));
    }
    let hop = ((n as f64) * (1.0 - cfg.overlap)).round().max(1.0) as usize;
    let window: Vec<f64> = match cfg.window {
        Window::Rect => vec![1.0; n],
        Window::Hann => (0..n)
            .map(|i| {
                let w = std::f64::consts::PI * i as f64 / n as f64;
                w.sin() * w.sin()
            })
            .collect(),
    };
    let win_power: f64 = window.iter().map(|w| w * w).sum();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut acc = vec![0.0f64; n];
    let mut segments = 0usize;
    let mut start = 0usize;
    while start + n <= x.len() {
        let mut buf: Vec<Complex64> = x[start..start + n]
            .iter()
            .zip(&window)
            .map(|(&v, &w)| Complex64::new(v * w, 0.0))
            .collect();
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let norm = 1.0 / (segments as f64 * win_power * cfg.sample_rate_hz);
    // DC-centered ordering.
    let half = n / 2;
    let mut freq_hz = Vec::with_capacity(n);
    let mut power_db = Vec::with_capacity(n);
    for i in 0..n {
        let k = (i + half) % n;
        let f = (k as f64 / n as f64 - if k >= half { 1.0 } else { 0.0 }) * cfg.sample_rate_hz;
        // guard against exact zeros before the log
        let p = (acc[k] * norm).max(1e-300);
        freq_hz.push(f);
        power_db.push(10.0 * p.log10());
    }
    Ok(Spectrum { freq_hz, power_db, num_segments: segments })
}

/// Mean dB level over bins with `f_lo < |f| <= f_hi`. The DC bin itself is
/// excluded so leakage-limited nulls don't dominate.
pub fn mean_db_in_band(spec: &Spectrum, f_lo: f64, f_hi: f64) -> f64 {
    let vals: Vec<f64> = spec
        .freq_hz
        .iter()
        .zip(&spec.power_db)
        .filter(|(&f, _)| f.abs() > f_lo && f.abs() <= f_hi)
        .map(|(_, &p)| p)
        .collect();
    assert!(!vals.is_empty(), "band ({f_lo}, {f_hi}] holds no bins");
    vals.iter().sum::<f64>() / vals.len() as f64
}
