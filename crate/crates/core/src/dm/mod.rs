//! Fixed-length invertible amplitude shapers.
//!
//! All shapers map `k` uniform input bits to a block of `ℓ` amplitudes from
//! the constellation alphabet and back. [`ccdm`] keeps a constant composition
//! per block; [`ess`] bounds per-block energy (and optionally the fourth
//! moment, the K-ESS variant). [`ideal_as`] draws i.i.d. amplitudes and has
//! no inverse; it models the infinite-blocklength limit.

pub mod ccdm;
pub mod ess;

use crate::constellation::AmplitudeDistribution;
use crate::error::{Error, Result};
use crate::util::seeded_rng;
use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use ccdm::Ccdm;
pub use ess::{build_ess_trellis, build_kess_for_rate, min_e_max_for_capacity, EssTrellis};

/// A block of `ℓ` raw (odd-integer, unscaled) amplitudes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmplitudeBlock {
    pub amplitudes: Vec<u32>,
}

impl AmplitudeBlock {
    pub fn new(amplitudes: Vec<u32>) -> Self {
        Self { amplitudes }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Sum of squared amplitudes.
    pub fn energy(&self) -> u64 {
        self.amplitudes.iter().map(|&a| (a as u64).pow(2)).sum()
    }

    /// Sum of fourth powers.
    pub fn fourth_moment(&self) -> u64 {
        self.amplitudes.iter().map(|&a| (a as u64).pow(4)).sum()
    }

    /// Multiset of amplitudes as counts aligned with `alphabet`.
    pub fn composition(&self, alphabet: &[u32]) -> Result<Composition> {
        let mut counts = vec![0usize; alphabet.len()];
        for &a in &self.amplitudes {
            let idx = alphabet
                .iter()
                .position(|&x| x == a)
                .ok_or_else(|| Error::Codec(format!("amplitude {a} not in alphabet")))?;
            counts[idx] += 1;
        }
        Ok(Composition { counts })
    }
}

/// Amplitude counts per alphabet entry, summing to the blocklength.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Composition {
    pub counts: Vec<usize>,
}

impl Composition {
    pub fn block_len(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Empirical distribution of the composition.
    pub fn distribution(&self) -> Vec<f64> {
        let n = self.block_len() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Versioned JSON cache form of a composition.
#[derive(Debug, Serialize, Deserialize)]
pub struct CompositionCache {
    pub version: u32,
    pub alphabet: Vec<u32>,
    pub block_len: usize,
    pub counts: Vec<usize>,
}

impl CompositionCache {
    pub const VERSION: u32 = 1;

    pub fn new(alphabet: &[u32], comp: &Composition) -> Self {
        Self {
            version: Self::VERSION,
            alphabet: alphabet.to_vec(),
            block_len: comp.block_len(),
            counts: comp.counts.clone(),
        }
    }

    pub fn into_composition(self) -> Result<Composition> {
        if self.version != Self::VERSION {
            return Err(Error::Serde(format!(
                "composition cache version {} unsupported",
                self.version
            )));
        }
        let comp = Composition { counts: self.counts };
        if comp.block_len() != self.block_len {
            return Err(Error::Serde("composition counts do not sum to block_len".into()));
        }
        Ok(comp)
    }
}

/// Common interface of bit-driven amplitude shapers.
pub trait AmplitudeShaper: Send + Sync {
    /// Block length `ℓ` in amplitudes.
    fn block_len(&self) -> usize;
    /// Number of input bits `k` consumed per block.
    fn capacity_bits(&self) -> usize;
    /// Maps exactly `capacity_bits` bits to an amplitude block.
    fn encode(&self, bits: &[bool]) -> Result<AmplitudeBlock>;
    /// Exact inverse of `encode`.
    fn decode(&self, block: &AmplitudeBlock) -> Result<Vec<bool>>;
}

/// Rounds `ℓ·P_a` to integer counts summing to `ℓ`, fixing the total by
/// repeatedly stepping the entry that leaves the smallest KL divergence from
/// the target distribution. Deterministic; ties resolve to the lowest index.
pub fn quantize_composition(dist: &AmplitudeDistribution, block_len: usize) -> Composition {
    let p = dist.probabilities();
    let n = block_len as f64;
    let mut counts: Vec<i64> = p.iter().map(|&pi| (n * pi).round() as i64).collect();

    let kl = |counts: &[i64]| -> f64 {
        counts
            .iter()
            .zip(p)
            .filter(|(&c, _)| c > 0)
            .map(|(&c, &pi)| {
                let q = c as f64 / n;
                if pi <= 0.0 {
                    f64::INFINITY
                } else {
                    q * (q / pi).log2()
                }
            })
            .sum()
    };

    loop {
        let total: i64 = counts.iter().sum();
        if total == block_len as i64 {
            break;
        }
        let delta: i64 = if total > block_len as i64 { -1 } else { 1 };
        let mut best: Option<(usize, f64)> = None;
        for i in 0..counts.len() {
            if delta < 0 && counts[i] == 0 {
                continue;
            }
            counts[i] += delta;
            let d = kl(&counts);
            counts[i] -= delta;
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        let (i, _) = best.expect("at least one adjustable entry");
        counts[i] += delta;
    }
    Composition {
        counts: counts.into_iter().map(|c| c as usize).collect(),
    }
}

/// Draws `ℓ` i.i.d. amplitudes from `dist` over `alphabet` (ideal amplitude
/// shaping, the infinite-blocklength reference).
pub fn ideal_as(
    dist: &AmplitudeDistribution,
    alphabet: &[u32],
    block_len: usize,
    seed: u64,
) -> AmplitudeBlock {
    let mut rng = seeded_rng(seed);
    let cdf: Vec<f64> = dist
        .probabilities()
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let amplitudes = (0..block_len)
        .map(|_| {
            let u: f64 = rng.gen();
            let idx = cdf.iter().position(|&c| u < c).unwrap_or(alphabet.len() - 1);
            alphabet[idx]
        })
        .collect();
    AmplitudeBlock::new(amplitudes)
}

/// Interprets `bits` (MSB first) as an unsigned integer.
pub fn bits_to_biguint(bits: &[bool]) -> BigUint {
    let mut x = BigUint::default();
    for &b in bits {
        x <<= 1u8;
        if b {
            x += 1u8;
        }
    }
    x
}

/// Writes `x` as exactly `n` bits, MSB first. Panics if `x >= 2^n`.
pub fn biguint_to_bits(x: &BigUint, n: usize) -> Vec<bool> {
    assert!(x.bits() as usize <= n, "value does not fit in {n} bits");
    (0..n).rev().map(|i| x.bit(i as u64)).collect()
}
