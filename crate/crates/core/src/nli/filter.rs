//! Assembly of the energy-model filters from perturbation kernels.
//!
//! For intra-channel (SPM) pairs the intra-polarization filter doubles every
//! kernel tap except lag zero; the inter-polarization filter is the kernel
//! itself. For inter-channel (XPM) pairs the doubling applies at every lag:
//!
//! ```text
//! c'=c,  p'=p :  h(n) = 2·h_spm(n,0)  for n ≠ 0,  h_spm(0,0) at n = 0
//! c'=c,  p'≠p:  h(n) =   h_spm(n,0)
//! c'≠c,  p'=p :  h(n) = 2·h_xpm(n,0)
//! c'≠c,  p'≠p:  h(n) =   h_xpm(n,0)
//! ```

use super::kernel::PerturbationKernel;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Intra- or inter-polarization filter variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolPair {
    Intra,
    Inter,
}

/// Real nonnegative taps over a contiguous lag range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterTaps {
    pub m_min: i64,
    pub taps: Vec<f64>,
}

impl FilterTaps {
    pub fn m_max(&self) -> i64 {
        self.m_min + self.taps.len() as i64 - 1
    }

    pub fn tap(&self, m: i64) -> f64 {
        let idx = m - self.m_min;
        if idx < 0 || idx as usize >= self.taps.len() {
            0.0
        } else {
            self.taps[idx as usize]
        }
    }

    /// Sum of all taps (the DC response).
    pub fn dc(&self) -> f64 {
        self.taps.iter().sum()
    }

    /// Squared magnitude of the discrete-time frequency response at `f` Hz
    /// for taps spaced by `symbol_period` seconds.
    pub fn response_mag_sq(&self, f_hz: f64, symbol_period: f64) -> f64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for (i, &h) in self.taps.iter().enumerate() {
            let m = (self.m_min + i as i64) as f64;
            let phase = -2.0 * std::f64::consts::PI * f_hz * m * symbol_period;
            re += h * phase.cos();
            im += h * phase.sin();
        }
        re * re + im * im
    }

    /// Trims negligible leading/trailing taps: a tap may be dropped while it
    /// stays below `threshold·peak` and the total dropped mass stays below
    /// `threshold·Σ|taps|`.
    pub fn truncated(&self, threshold: f64) -> FilterTaps {
        let total: f64 = self.taps.iter().map(|h| h.abs()).sum();
        let peak = self.taps.iter().cloned().fold(0.0, f64::max);
        let budget = threshold * total;
        let mut lo = 0usize;
        let mut hi = self.taps.len();
        let mut dropped = 0.0;
        while lo < hi {
            let h = self.taps[lo].abs();
            if h < threshold * peak && dropped + h < budget {
                dropped += h;
                lo += 1;
            } else {
                break;
            }
        }
        while hi > lo {
            let h = self.taps[hi - 1].abs();
            if h < threshold * peak && dropped + h < budget {
                dropped += h;
                hi -= 1;
            } else {
                break;
            }
        }
        FilterTaps {
            m_min: self.m_min + lo as i64,
            taps: self.taps[lo..hi].to_vec(),
        }
    }
}

/// Filters for every requested (channel-offset, polarization-pair)
/// combination, plus the link constants needed to use them.
#[derive(Debug, Clone)]
pub struct NliFilterBank {
    entries: BTreeMap<(i32, PolPair), FilterTaps>,
    gamma_per_w_m: f64,
    symbol_period_s: f64,
    truncation_threshold: f64,
}

/// Assembles the filter bank from kernels (one per channel offset in scope).
pub fn build_filter_bank(
    kernels: &[PerturbationKernel],
    gamma_per_w_m: f64,
    truncation_threshold: f64,
) -> Result<NliFilterBank> {
    if kernels.is_empty() {
        return Err(Error::Config("no kernels supplied".into()));
    }
    let symbol_period_s = kernels[0].symbol_period_s();
    let mut entries = BTreeMap::new();
    for kernel in kernels {
        let (axis, m_min) = kernel.axis();
        let offset = kernel.channel_offset();
        // Truncate the kernel axis once so intra and inter filters keep the
        // same lag range and the factor-2 relation stays exact everywhere.
        let trimmed = FilterTaps { m_min, taps: axis.to_vec() }.truncated(truncation_threshold);
        let intra: Vec<f64> = trimmed
            .taps
            .iter()
            .enumerate()
            .map(|(i, &h)| {
                let m = trimmed.m_min + i as i64;
                if offset == 0 && m == 0 {
                    h
                } else {
                    2.0 * h
                }
            })
            .collect();
        entries.insert((offset, PolPair::Intra), FilterTaps { m_min: trimmed.m_min, taps: intra });
        entries.insert((offset, PolPair::Inter), trimmed);
    }
    Ok(NliFilterBank {
        entries,
        gamma_per_w_m,
        symbol_period_s,
        truncation_threshold,
    })
}

impl NliFilterBank {
    /// Taps for interferer channel offset `c' - c` and polarization pair.
    pub fn taps(&self, channel_offset: i32, pair: PolPair) -> Option<&FilterTaps> {
        self.entries.get(&(channel_offset, pair))
    }

    pub fn channel_offsets(&self) -> Vec<i32> {
        let mut v: Vec<i32> = self.entries.keys().map(|&(c, _)| c).collect();
        v.dedup();
        v
    }

    pub fn gamma_per_w_m(&self) -> f64 {
        self.gamma_per_w_m
    }

    pub fn symbol_period_s(&self) -> f64 {
        self.symbol_period_s
    }

    pub fn truncation_threshold(&self) -> f64 {
        self.truncation_threshold
    }

    /// Versioned JSON cache keyed by link hash and (c', p, p') labels.
    pub fn to_json(&self, link_hash: &str) -> String {
        let entries = self
            .entries
            .iter()
            .map(|(&(offset, pair), taps)| BankCacheEntry {
                channel_offset: offset,
                pol_pair: pair,
                m_min: taps.m_min,
                taps: taps.taps.clone(),
            })
            .collect();
        let cache = BankCache {
            version: BankCache::VERSION,
            link_hash: link_hash.to_string(),
            gamma_per_w_m: self.gamma_per_w_m,
            symbol_period_s: self.symbol_period_s,
            truncation_threshold: self.truncation_threshold,
            entries,
        };
        serde_json::to_string_pretty(&cache).expect("bank cache serializes")
    }

    /// Loads a cache written by [`NliFilterBank::to_json`]; `expected_hash`
    /// guards against stale entries for a different link.
    pub fn from_json(json: &str, expected_hash: &str) -> Result<Self> {
        let cache: BankCache = serde_json::from_str(json)?;
        if cache.version != BankCache::VERSION {
            return Err(Error::Serde(format!(
                "filter cache version {} unsupported",
                cache.version
            )));
        }
        if cache.link_hash != expected_hash {
            return Err(Error::Serde("filter cache was built for a different link".into()));
        }
        let mut entries = BTreeMap::new();
        for e in cache.entries {
            entries.insert(
                (e.channel_offset, e.pol_pair),
                FilterTaps { m_min: e.m_min, taps: e.taps },
            );
        }
        Ok(Self {
            entries,
            gamma_per_w_m: cache.gamma_per_w_m,
            symbol_period_s: cache.symbol_period_s,
            truncation_threshold: cache.truncation_threshold,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct BankCache {
    version: u32,
    link_hash: String,
    gamma_per_w_m: f64,
    symbol_period_s: f64,
    truncation_threshold: f64,
    entries: Vec<BankCacheEntry>,
}

impl BankCache {
    const VERSION: u32 = 1;
}

#[derive(Serialize, Deserialize)]
struct BankCacheEntry {
    channel_offset: i32,
    pol_pair: PolPair,
    m_min: i64,
    taps: Vec<f64>,
}

/// 3 dB bandwidth of a lowpass-shaped response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth3Db {
    Hz(f64),
    /// The response never drops 3 dB below its DC value inside the symbol
    /// band (e.g. a single tap).
    Unbounded,
}

/// Smallest positive frequency where `|H(f)|²` falls 3 dB below `|H(0)|²`,
/// located by bracketing and bisection on the interpolated response.
pub fn filter_bandwidth_3db(taps: &FilterTaps, symbol_period: f64) -> Bandwidth3Db {
    let h0 = taps.response_mag_sq(0.0, symbol_period);
    if h0 <= 0.0 {
        return Bandwidth3Db::Unbounded;
    }
    let target = h0 / 2.0;
    let nyquist = 0.5 / symbol_period;
    // Geometric sweep up from a tiny fraction of the band to bracket the
    // first crossing.
    let mut f_lo = 0.0f64;
    let mut f_hi = None;
    let mut f = nyquist * 1e-6;
    while f <= nyquist {
        if taps.response_mag_sq(f, symbol_period) < target {
            f_hi = Some(f);
            break;
        }
        f_lo = f;
        f *= 1.25;
    }
    let Some(mut hi) = f_hi else {
        return Bandwidth3Db::Unbounded;
    };
    // Refine the bracket with a linear scan so we keep the *first* crossing,
    // then bisect.
    let n_scan = 64;
    for i in 1..=n_scan {
        let fi = f_lo + (hi - f_lo) * i as f64 / n_scan as f64;
        if taps.response_mag_sq(fi, symbol_period) < target {
            hi = fi;
            break;
        }
        f_lo = fi;
    }
    let mut lo = f_lo;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if taps.response_mag_sq(mid, symbol_period) < target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Bandwidth3Db::Hz(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::config::{link_setup1, LinkSystemConfig};
    use crate::nli::kernel::{compute_kernel, KernelOptions};
    use crate::util::log_log_slope;

    fn bank_for(link: &LinkSystemConfig, offsets: &[i32]) -> NliFilterBank {
        let opts = KernelOptions::default();
        let kernels: Vec<_> = offsets
            .iter()
            .map(|&c| compute_kernel(link, c, &opts).unwrap())
            .collect();
        build_filter_bank(&kernels, link.gamma_per_w_m(), 1e-4).unwrap()
    }

    #[test]
    fn spm_factor_two_relation_is_exact() {
        let bank = bank_for(&LinkSystemConfig { n_spans: 4, ..link_setup1() }, &[0]);
        let intra = bank.taps(0, PolPair::Intra).unwrap();
        let inter = bank.taps(0, PolPair::Inter).unwrap();
        assert_eq!(intra.tap(0), inter.tap(0), "equal at n = 0");
        for m in 1..=inter.m_max() {
            assert_eq!(intra.tap(m), 2.0 * inter.tap(m), "m = {m}");
            assert_eq!(intra.tap(-m), 2.0 * inter.tap(-m), "m = -{m}");
        }
        assert!(intra.taps.iter().all(|&h| h >= 0.0));
    }

    #[test]
    fn truncation_drops_less_mass_than_threshold() {
        let link = LinkSystemConfig { n_spans: 4, ..link_setup1() };
        let kernel = compute_kernel(&link, 1, &KernelOptions::default()).unwrap();
        let (axis, m_min) = kernel.axis();
        let full = FilterTaps { m_min, taps: axis.to_vec() };
        let threshold = 1e-3;
        let trimmed = full.truncated(threshold);
        assert!(trimmed.taps.len() < full.taps.len(), "something must be trimmed");
        let total: f64 = full.taps.iter().sum();
        let kept: f64 = trimmed.taps.iter().sum();
        assert!(total - kept < threshold * total);
        assert!((trimmed.dc() - kept).abs() < 1e-18);
    }

    #[test]
    fn single_tap_bandwidth_is_unbounded() {
        let taps = FilterTaps { m_min: 0, taps: vec![1.0] };
        assert_eq!(filter_bandwidth_3db(&taps, 1.0 / 32e9), Bandwidth3Db::Unbounded);
    }

    #[test]
    fn two_tap_filter_crosses_at_quarter_rate() {
        // |H(f)|² = 2 + 2cos(2πfT): 3 dB point at f = 1/(4T).
        let t = 1.0 / 32e9;
        let taps = FilterTaps { m_min: 0, taps: vec![1.0, 1.0] };
        match filter_bandwidth_3db(&taps, t) {
            Bandwidth3Db::Hz(f) => assert!((f - 1.0 / (4.0 * t)).abs() < 1e-3 / t),
            Bandwidth3Db::Unbounded => panic!("expected a crossing"),
        }
    }

    #[test]
    fn xpm_filter_is_more_selective_than_spm() {
        let link = LinkSystemConfig { n_spans: 20, ..link_setup1() };
        let bank = bank_for(&link, &[0, 1]);
        let t = link.symbol_period_s();
        let bw = |off: i32| match filter_bandwidth_3db(bank.taps(off, PolPair::Intra).unwrap(), t) {
            Bandwidth3Db::Hz(f) => f,
            Bandwidth3Db::Unbounded => f64::INFINITY,
        };
        assert!(bw(1) < bw(0), "XPM bw {} vs SPM bw {}", bw(1), bw(0));
    }

    #[test]
    fn bandwidth_scales_inversely_with_span_count() {
        let spans = [1usize, 10, 20, 40];
        let mut bws = Vec::new();
        for &n in &spans {
            let link = LinkSystemConfig { n_spans: n, n_channels: 1, ..link_setup1() };
            let bank = bank_for(&link, &[0]);
            match filter_bandwidth_3db(bank.taps(0, PolPair::Intra).unwrap(), link.symbol_period_s()) {
                Bandwidth3Db::Hz(f) => bws.push(f),
                Bandwidth3Db::Unbounded => panic!("span count {n} gave no crossing"),
            }
        }
        let lens: Vec<f64> = spans.iter().map(|&n| n as f64).collect();
        let slope = log_log_slope(&lens, &bws);
        assert!(
            (-1.1..=-0.9).contains(&slope),
            "bandwidth vs length slope {slope}, bws {bws:?}"
        );
    }

    #[test]
    fn bandwidth_scales_inversely_with_baud_rate() {
        let bauds = [16e9, 32e9, 64e9];
        let mut bws = Vec::new();
        for &b in &bauds {
            let link = LinkSystemConfig {
                baud_rate_hz: b,
                n_channels: 1,
                ..link_setup1()
            };
            let bank = bank_for(&link, &[0]);
            match filter_bandwidth_3db(bank.taps(0, PolPair::Intra).unwrap(), link.symbol_period_s()) {
                Bandwidth3Db::Hz(f) => bws.push(f),
                Bandwidth3Db::Unbounded => panic!("baud {b} gave no crossing"),
            }
        }
        let slope = log_log_slope(&bauds.to_vec(), &bws);
        assert!(
            (-1.15..=-0.85).contains(&slope),
            "bandwidth vs baud slope {slope}, bws {bws:?}"
        );
    }

    #[test]
    fn cache_round_trip_checks_link_hash() {
        let link = LinkSystemConfig { n_spans: 2, n_channels: 3, ..link_setup1() };
        let bank = bank_for(&link, &[-1, 0, 1]);
        let json = bank.to_json("abc123");
        let back = NliFilterBank::from_json(&json, "abc123").unwrap();
        assert_eq!(back.taps(1, PolPair::Inter), bank.taps(1, PolPair::Inter));
        assert!(NliFilterBank::from_json(&json, "zzz").is_err());
    }
}
