//! Transmit-side pulse shaping / WDM multiplexing and the coherent receiver
//! chain (channel selection, CD compensation, matched filtering,
//! downsampling, mean-phase rotation).
//!
//! Everything operates on one circular DFT block: the symbol block of length
//! N maps to N·os samples, root-raised-cosine shaping and matched filtering
//! are exact frequency-domain multiplications, and channel shifts land on
//! integer DFT bins. Back-to-back, transmit and receive are exact inverses
//! up to floating-point rounding.

use super::config::LinkSystemConfig;
use super::waveform::Waveform;
use crate::error::{Error, Result};
use crate::mapping::{DualPolFrame, PolMode};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Signed frequency of DFT bin `k` out of `n` at sample rate `fs`.
fn bin_freq(k: usize, n: usize, fs: f64) -> f64 {
    let k = k as f64;
    let n = n as f64;
    if k < n / 2.0 {
        k * fs / n
    } else {
        (k - n) * fs / n
    }
}

/// Root-raised-cosine power shape (peak 1) at frequency `f` for symbol rate
/// `baud` and roll-off `rolloff`.
fn rc_power(f: f64, baud: f64, rolloff: f64) -> f64 {
    let half = baud / 2.0;
    let fa = f.abs();
    let flat = half * (1.0 - rolloff);
    let edge = half * (1.0 + rolloff);
    if fa <= flat {
        1.0
    } else if fa < edge {
        let arg = std::f64::consts::PI / (2.0 * rolloff * half) * (fa - flat);
        let c = arg.cos();
        c * c
    } else {
        0.0
    }
}

/// Shared DFT-grid machinery for one (symbol count, oversampling) pair.
pub struct TxRxEngine {
    n_symbols: usize,
    os: usize,
    n_total: usize,
    sample_rate_hz: f64,
    baud_rate_hz: f64,
    /// Real amplitude response of the unit-energy RRC at each bin.
    rrc: Vec<f64>,
    /// Nyquist fold constant `Σ_j |G|²(k0 + jN)` (bin-independent).
    fold: f64,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl TxRxEngine {
    pub fn new(link: &LinkSystemConfig, n_symbols: usize) -> Result<Self> {
        link.validate()?;
        let divisor = link.required_symbol_divisor()?;
        if n_symbols == 0 || n_symbols % divisor != 0 {
            return Err(Error::Config(format!(
                "symbol count {n_symbols} must be a positive multiple of {divisor} so WDM \
                 shifts land on DFT bins"
            )));
        }
        let os = link.sim_oversampling();
        let n_total = n_symbols * os;
        let fs = os as f64 * link.baud_rate_hz;
        let ts = 1.0 / fs;
        let rc: Vec<f64> = (0..n_total)
            .map(|k| rc_power(bin_freq(k, n_total, fs), link.baud_rate_hz, link.rolloff))
            .collect();
        let rc_sum: f64 = rc.iter().sum();
        // Unit-energy impulse response: Σ|g[i]|²·Ts = (Ts·κ²/Ntot)·Σ rc = 1.
        let kappa = (n_total as f64 / (ts * rc_sum)).sqrt();
        let rrc: Vec<f64> = rc.iter().map(|&p| kappa * p.sqrt()).collect();
        // Fold constant measured at bin 0 (defensive; analytically κ²).
        let fold: f64 = (0..os).map(|j| rrc[j * n_symbols] * rrc[j * n_symbols]).sum();
        let mut planner = FftPlanner::new();
        Ok(Self {
            n_symbols,
            os,
            n_total,
            sample_rate_hz: fs,
            baud_rate_hz: link.baud_rate_hz,
            rrc,
            fold,
            fft: planner.plan_fft_forward(n_total),
            ifft: planner.plan_fft_inverse(n_total),
        })
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// DFT bin offset of WDM channel `c`; integer by construction.
    fn channel_bins(&self, link: &LinkSystemConfig, c: i32) -> i64 {
        let f = link.channel_offset_hz(c);
        (f / self.sample_rate_hz * self.n_total as f64).round() as i64
    }

    fn spectrum_of_symbols(&self, symbols: &[Complex64]) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n_total];
        for (n, &s) in symbols.iter().enumerate() {
            buf[n * self.os] = s;
        }
        self.fft.process(&mut buf);
        buf
    }

    /// Pulse-shapes and multiplexes per-channel symbol frames onto one
    /// waveform. Frames must share the engine's symbol count.
    pub fn modulate(
        &self,
        frames: &BTreeMap<i32, DualPolFrame>,
        link: &LinkSystemConfig,
    ) -> Result<Waveform> {
        if frames.is_empty() {
            return Err(Error::Config("no channel frames".into()));
        }
        let mut spec_x = vec![Complex64::new(0.0, 0.0); self.n_total];
        let mut spec_y = vec![Complex64::new(0.0, 0.0); self.n_total];
        for (&c, frame) in frames {
            if frame.len() != self.n_symbols {
                return Err(Error::LengthMismatch {
                    expected: self.n_symbols,
                    got: frame.len(),
                    context: "frame length vs engine",
                });
            }
            if !link.channel_offsets().contains(&c) {
                return Err(Error::Config(format!("channel {c} outside the WDM grid")));
            }
            let shift = self.channel_bins(link, c);
            for (pol, acc) in [(&frame.x, &mut spec_x), (&frame.y, &mut spec_y)] {
                let mut spec = self.spectrum_of_symbols(pol);
                for (k, s) in spec.iter_mut().enumerate() {
                    *s *= self.rrc[k];
                }
                for (k, s) in spec.iter().enumerate() {
                    let kk = (k as i64 + shift).rem_euclid(self.n_total as i64) as usize;
                    acc[kk] += s;
                }
            }
        }
        self.ifft.process(&mut spec_x);
        self.ifft.process(&mut spec_y);
        let norm = 1.0 / self.n_total as f64;
        for s in spec_x.iter_mut().chain(spec_y.iter_mut()) {
            *s *= norm;
        }
        Waveform::new(spec_x, spec_y, self.sample_rate_hz)
    }

    /// Full receiver for one channel: CD compensation over `cd_length_m`,
    /// channel shift to baseband, matched RRC filter, symbol-rate
    /// downsampling and (when a reference frame is given) a mean phase
    /// rotation per polarization.
    pub fn receive(
        &self,
        wave: &Waveform,
        link: &LinkSystemConfig,
        channel: i32,
        cd_length_m: f64,
        reference: Option<&DualPolFrame>,
    ) -> Result<DualPolFrame> {
        if wave.len() != self.n_total {
            return Err(Error::LengthMismatch {
                expected: self.n_total,
                got: wave.len(),
                context: "waveform length vs engine",
            });
        }
        let beta2 = link.beta2_s2_per_m();
        let shift = self.channel_bins(link, channel);
        let scale = self.os as f64 / self.fold;
        let mut out: [Vec<Complex64>; 2] = [Vec::new(), Vec::new()];
        for (idx, samples) in [&wave.x, &wave.y].into_iter().enumerate() {
            let mut spec = samples.clone();
            self.fft.process(&mut spec);
            // CD compensation in the absolute frequency frame (inverts the
            // propagation operator exp(+j β₂ ω² z / 2) including the
            // channel's group delay).
            if cd_length_m != 0.0 {
                for (k, s) in spec.iter_mut().enumerate() {
                    let w = 2.0 * std::f64::consts::PI * bin_freq(k, self.n_total, self.sample_rate_hz);
                    let phase = -0.5 * beta2 * w * w * cd_length_m;
                    *s *= Complex64::new(0.0, phase).exp();
                }
            }
            // Shift the channel to baseband and apply the matched filter.
            let mut based = vec![Complex64::new(0.0, 0.0); self.n_total];
            for (k, b) in based.iter_mut().enumerate() {
                let kk = (k as i64 + shift).rem_euclid(self.n_total as i64) as usize;
                *b = spec[kk] * self.rrc[k];
            }
            self.ifft.process(&mut based);
            let norm = scale / self.n_total as f64;
            out[idx] = (0..self.n_symbols)
                .map(|n| based[n * self.os] * norm)
                .collect();
        }
        let [mut rx, mut ry] = out;
        if let Some(reference) = reference {
            if reference.len() != self.n_symbols {
                return Err(Error::LengthMismatch {
                    expected: self.n_symbols,
                    got: reference.len(),
                    context: "CPR reference frame",
                });
            }
            for (r, t) in [(&mut rx, &reference.x), (&mut ry, &reference.y)] {
                let acc: Complex64 = t.iter().zip(r.iter()).map(|(s, v)| s.conj() * v).sum();
                if acc.norm_sqr() > 0.0 {
                    let rot = Complex64::from_polar(1.0, -acc.arg());
                    for v in r.iter_mut() {
                        *v *= rot;
                    }
                }
            }
        }
        DualPolFrame::new(rx, ry, reference.map_or(PolMode::Dual, |f| f.pol()))
    }
}
