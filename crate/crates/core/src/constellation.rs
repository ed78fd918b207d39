//! Constellations, Maxwell-Boltzmann amplitude distributions and PAS rate
//! accounting.
//!
//! A `2^m`-ary PAM constellation is split into `2^(m-1)` positive amplitudes
//! and one sign bit. Amplitude shaping acts on the amplitudes only; sign bits
//! stay uniform (they carry information bits and FEC parity, which we model
//! as uniform i.i.d. bits).

use crate::error::{Error, Result};
use crate::util::seeded_rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Shaped PAM/QAM constellation: raw odd amplitude alphabet, reflected-binary
/// amplitude bit labels, and a linear scale applied when symbols are built.
///
/// The raw alphabet is `{1, 3, ..., 2^m - 1}`. Keeping it in integer form
/// makes shaper trellises exact; `scale` maps the normalized symbols onto a
/// target mean launch power.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapedConstellation {
    bits_per_pam: u32,
    amplitudes: Vec<u32>,
    scale: f64,
}

impl ShapedConstellation {
    /// Builds the `2^m`-ary PAM constellation with unit scale.
    pub fn new(bits_per_pam: u32) -> Result<Self> {
        if bits_per_pam < 2 {
            return Err(Error::Domain(format!(
                "bits_per_pam must be >= 2, got {bits_per_pam}"
            )));
        }
        let n_amp = 1usize << (bits_per_pam - 1);
        let amplitudes = (0..n_amp).map(|i| 2 * i as u32 + 1).collect();
        Ok(Self {
            bits_per_pam,
            amplitudes,
            scale: 1.0,
        })
    }

    pub fn bits_per_pam(&self) -> u32 {
        self.bits_per_pam
    }

    /// Raw (unscaled) odd amplitude alphabet, strictly increasing.
    pub fn amplitudes(&self) -> &[u32] {
        &self.amplitudes
    }

    pub fn num_amplitudes(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Returns a copy with `scale` chosen so a QAM symbol whose I and Q
    /// amplitudes are drawn from `dist` has mean energy `energy` (per
    /// polarization). Used to hit a configured launch power: with unit-energy
    /// pulses at symbol period `T`, mean symbol energy `P*T` gives average
    /// waveform power `P`.
    pub fn with_mean_qam_energy(&self, dist: &AmplitudeDistribution, energy: f64) -> Result<Self> {
        if energy <= 0.0 {
            return Err(Error::Domain("target energy must be positive".into()));
        }
        let e_pam = self.mean_raw_pam_energy(dist);
        let mut out = self.clone();
        out.scale = (energy / (2.0 * e_pam)).sqrt();
        Ok(out)
    }

    /// Mean squared raw amplitude under `dist`.
    pub fn mean_raw_pam_energy(&self, dist: &AmplitudeDistribution) -> f64 {
        self.amplitudes
            .iter()
            .zip(dist.probabilities())
            .map(|(&a, &p)| p * (a as f64) * (a as f64))
            .sum()
    }

    /// `(m-1)`-bit reflected-binary (Gray) label of amplitude index `idx`,
    /// MSB first. Adjacent amplitudes differ in exactly one bit.
    pub fn amplitude_label(&self, idx: usize) -> Vec<bool> {
        let gray = (idx as u32) ^ ((idx as u32) >> 1);
        let n = self.bits_per_pam - 1;
        (0..n).rev().map(|b| (gray >> b) & 1 == 1).collect()
    }

    /// Full m-bit label of a PAM symbol: sign bit first, then the amplitude
    /// label. `sign = true` means a negative symbol.
    pub fn pam_label(&self, sign: bool, amp_idx: usize) -> Vec<bool> {
        let mut bits = Vec::with_capacity(self.bits_per_pam as usize);
        bits.push(sign);
        bits.extend(self.amplitude_label(amp_idx));
        bits
    }

    /// Scaled real value of a PAM point.
    pub fn pam_value(&self, sign: bool, amp_idx: usize) -> f64 {
        let a = self.amplitudes[amp_idx] as f64 * self.scale;
        if sign {
            -a
        } else {
            a
        }
    }

    /// All scaled PAM points with their labels, ordered by value. Used for
    /// hard decisions and posterior computation.
    pub fn pam_points(&self) -> Vec<PamPoint> {
        let mut pts = Vec::with_capacity(2 * self.amplitudes.len());
        for sign in [true, false] {
            for idx in 0..self.amplitudes.len() {
                pts.push(PamPoint {
                    value: self.pam_value(sign, idx),
                    sign,
                    amp_idx: idx,
                });
            }
        }
        pts.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
        pts
    }

    /// Finds the amplitude index whose scaled value matches `|value|`.
    pub fn amplitude_index_of(&self, value: f64) -> Result<usize> {
        let a = value.abs() / self.scale;
        let idx = ((a - 1.0) / 2.0).round() as i64;
        if idx < 0 || idx as usize >= self.amplitudes.len() {
            return Err(Error::Domain(format!("no amplitude matches value {value}")));
        }
        let idx = idx as usize;
        if ((self.amplitudes[idx] as f64) - a).abs() > 1e-6 {
            return Err(Error::Domain(format!("value {value} is not a lattice point")));
        }
        Ok(idx)
    }
}

/// One scaled PAM point.
#[derive(Debug, Clone, Copy)]
pub struct PamPoint {
    pub value: f64,
    pub sign: bool,
    pub amp_idx: usize,
}

/// Amplitude distribution aligned with a constellation's alphabet.
///
/// `mb_lambda` is the Maxwell-Boltzmann parameter of `P(a) ∝ exp(-λ a²)`;
/// zero means uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeDistribution {
    probabilities: Vec<f64>,
    mb_lambda: f64,
}

impl AmplitudeDistribution {
    /// Validates and wraps an explicit probability vector (`mb_lambda` is
    /// recorded as NaN-free zero for non-MB distributions).
    pub fn from_probabilities(probabilities: Vec<f64>) -> Result<Self> {
        validate_distribution(&probabilities)?;
        Ok(Self {
            probabilities,
            mb_lambda: 0.0,
        })
    }

    /// Maxwell-Boltzmann distribution `P(a) ∝ exp(-λ a²)` over the raw
    /// alphabet.
    pub fn maxwell_boltzmann(alphabet: &[u32], lambda: f64) -> Result<Self> {
        if lambda < 0.0 {
            return Err(Error::Domain("mb_lambda must be nonnegative".into()));
        }
        // Subtract the smallest exponent before exponentiating to stay finite
        // for large lambda.
        let e_min = (alphabet[0] as f64).powi(2);
        let weights: Vec<f64> = alphabet
            .iter()
            .map(|&a| (-lambda * ((a as f64).powi(2) - e_min)).exp())
            .collect();
        let z: f64 = weights.iter().sum();
        Ok(Self {
            probabilities: weights.into_iter().map(|w| w / z).collect(),
            mb_lambda: lambda,
        })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probabilities: vec![1.0 / n as f64; n],
            mb_lambda: 0.0,
        }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn mb_lambda(&self) -> f64 {
        self.mb_lambda
    }

    /// Entropy in bits, with `0 log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        entropy_bits(&self.probabilities)
    }
}

fn validate_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Domain("empty distribution".into()));
    }
    if p.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::Domain("probabilities must be finite and >= 0".into()));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("probabilities sum to {s}, not 1")));
    }
    Ok(())
}

/// Entropy of a probability vector in bits.
pub fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.log2())
        .sum::<f64>()
}

/// Fits the Maxwell-Boltzmann parameter so the amplitude distribution has the
/// requested entropy (bits/amplitude), by bisection on λ. Entropy is strictly
/// decreasing in λ, from `log2 |alphabet|` at λ = 0 toward 0.
pub fn fit_mb_lambda(target_entropy: f64, alphabet: &[u32]) -> Result<AmplitudeDistribution> {
    let h_max = (alphabet.len() as f64).log2();
    if !(target_entropy > 0.0 && target_entropy <= h_max) {
        return Err(Error::Domain(format!(
            "target entropy {target_entropy} outside (0, {h_max}]"
        )));
    }
    if (target_entropy - h_max).abs() < 1e-15 {
        return Ok(AmplitudeDistribution::maxwell_boltzmann(alphabet, 0.0)?);
    }
    let entropy_at = |lambda: f64| -> f64 {
        AmplitudeDistribution::maxwell_boltzmann(alphabet, lambda)
            .expect("lambda >= 0")
            .entropy()
    };
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while entropy_at(hi) > target_entropy {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Domain(format!(
                "entropy target {target_entropy} unreachable"
            )));
        }
    }
    // Bisect until the entropy matches to 1e-9 bits.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let h = entropy_at(mid);
        if h > target_entropy {
            lo = mid;
        } else {
            hi = mid;
        }
        if (h - target_entropy).abs() < 1e-12 {
            break;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let dist = AmplitudeDistribution::maxwell_boltzmann(alphabet, lambda)?;
    debug_assert!((dist.entropy() - target_entropy).abs() < 1e-9);
    Ok(dist)
}

/// PAS rate bookkeeping for one PAM dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PasRates {
    /// Shaping rate `k/ℓ` in bits/amplitude.
    pub shaping_rate: f64,
    /// Fraction of sign bits carrying information, `α ∈ [0, 1]`.
    pub sign_info_fraction: f64,
    /// Overall rate in bits/PAM-symbol, `R = R_s + α`.
    pub overall_rate: f64,
    /// Rate loss in bits/amplitude.
    pub rate_loss: f64,
    /// Flipping bits per shaper invocation.
    pub flipping_bits: u32,
}

impl PasRates {
    /// Assembles the rate set for a PAS scheme with `k` shaper input bits
    /// (including `v` flipping bits) over blocks of `len` amplitudes.
    pub fn new(
        dist: &AmplitudeDistribution,
        k: usize,
        len: usize,
        v: u32,
        sign_info_fraction: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&sign_info_fraction) {
            return Err(Error::Domain("sign_info_fraction outside [0, 1]".into()));
        }
        let loss = rate_loss(dist, k, len, v)?;
        let shaping_rate = (k as f64 - v as f64) / len as f64;
        Ok(Self {
            shaping_rate,
            sign_info_fraction,
            overall_rate: shaping_rate + sign_info_fraction,
            rate_loss: loss,
            flipping_bits: v,
        })
    }

    /// Sign-information fraction implied by a systematic FEC of rate `rc`
    /// over `m`-bit PAM labels: parity fills `(1-rc)·m` of each sign slot.
    pub fn sign_info_fraction_from_fec(bits_per_pam: u32, code_rate: f64) -> Result<f64> {
        let alpha = 1.0 - (1.0 - code_rate) * bits_per_pam as f64;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Domain(format!(
                "FEC rate {code_rate} leaves no room for sign bits (alpha = {alpha})"
            )));
        }
        Ok(alpha)
    }

    /// Overall rate in bits per (2-PAM-dimension) QAM symbol.
    pub fn bits_per_qam(&self) -> f64 {
        2.0 * self.overall_rate
    }
}

/// Rate loss in bits/amplitude with `v` flipping bits:
/// `H(P_a) - (k - v)/ℓ`. With `v = 0` this is the plain finite-length loss.
/// Tiny negative values (within 1e-12) are clamped to zero; anything more
/// negative means `k` overstates what the distribution can carry.
pub fn rate_loss(dist: &AmplitudeDistribution, k: usize, len: usize, v: u32) -> Result<f64> {
    if v as usize > k {
        return Err(Error::Domain(format!("flipping bits {v} exceed k = {k}")));
    }
    let loss = dist.entropy() - (k as f64 - v as f64) / len as f64;
    if loss < -1e-12 {
        return Err(Error::Consistency(format!(
            "negative rate loss {loss}: k = {k} too large for H = {}",
            dist.entropy()
        )));
    }
    Ok(loss.max(0.0))
}

/// Applies sign bits to an amplitude block: `s(n) = (-1)^sign(n) · a(n) · scale`.
pub fn assemble_pam(
    amplitudes: &[u32],
    signs: &[bool],
    constellation: &ShapedConstellation,
) -> Result<Vec<f64>> {
    if amplitudes.len() != signs.len() {
        return Err(Error::LengthMismatch {
            expected: amplitudes.len(),
            got: signs.len(),
            context: "assemble_pam signs",
        });
    }
    Ok(amplitudes
        .iter()
        .zip(signs)
        .map(|(&a, &neg)| {
            let v = a as f64 * constellation.scale();
            if neg {
                -v
            } else {
                v
            }
        })
        .collect())
}

/// Uniform i.i.d. sign bits, deterministic for a given seed. Stands in for
/// information bits plus systematic FEC parity on the sign rail.
pub fn sign_source(count: usize, seed: u64) -> Vec<bool> {
    let mut rng = seeded_rng(seed);
    (0..count).map(|_| rng.gen::<bool>()).collect()
}
