//! Constant composition distribution matcher.
//!
//! Implemented as exact lexicographic (un)ranking of constant-composition
//! sequences with big-integer arithmetic: the `k`-bit input is read as an
//! integer and unranked into the lexicographically ordered set of sequences
//! with the target composition. This gives bit-exact invertibility for any
//! blocklength we care about (ℓ up to a few thousand).

use super::{bits_to_biguint, biguint_to_bits, AmplitudeBlock, AmplitudeShaper, Composition};
use crate::error::{Error, Result};
use num_bigint::BigUint;
use num_traits::{One, Zero};

/// CCDM codec for a fixed composition over a fixed alphabet.
#[derive(Debug, Clone)]
pub struct Ccdm {
    alphabet: Vec<u32>,
    composition: Composition,
    total_sequences: BigUint,
    capacity_bits: usize,
}

impl Ccdm {
    pub fn new(alphabet: &[u32], composition: Composition) -> Result<Self> {
        if composition.counts.len() != alphabet.len() {
            return Err(Error::LengthMismatch {
                expected: alphabet.len(),
                got: composition.counts.len(),
                context: "composition vs alphabet",
            });
        }
        if composition.block_len() == 0 {
            return Err(Error::Domain("empty composition".into()));
        }
        let total_sequences = multinomial(&composition.counts);
        let capacity_bits = total_sequences.bits() as usize - 1;
        Ok(Self {
            alphabet: alphabet.to_vec(),
            composition,
            total_sequences,
            capacity_bits,
        })
    }

    pub fn composition(&self) -> &Composition {
        &self.composition
    }

    /// Exact number of sequences with the target composition.
    pub fn total_sequences(&self) -> &BigUint {
        &self.total_sequences
    }
}

impl AmplitudeShaper for Ccdm {
    fn block_len(&self) -> usize {
        self.composition.block_len()
    }

    /// `k = floor(log2(ℓ! / Π cᵢ!))`.
    fn capacity_bits(&self) -> usize {
        self.capacity_bits
    }

    fn encode(&self, bits: &[bool]) -> Result<AmplitudeBlock> {
        if bits.len() != self.capacity_bits {
            return Err(Error::LengthMismatch {
                expected: self.capacity_bits,
                got: bits.len(),
                context: "ccdm encode input bits",
            });
        }
        let mut index = bits_to_biguint(bits);
        let mut counts = self.composition.counts.clone();
        let mut remaining = self.block_len();
        let mut n_rem = self.total_sequences.clone();
        let mut out = Vec::with_capacity(remaining);
        while remaining > 0 {
            let mut chosen = None;
            for j in 0..counts.len() {
                if counts[j] == 0 {
                    continue;
                }
                // Sequences starting with amplitude j: N_rem * c_j / remaining
                // (an exact multinomial, so the division is exact).
                let n_j = &n_rem * counts[j] / BigUint::from(remaining);
                if index < n_j {
                    chosen = Some((j, n_j));
                    break;
                }
                index -= n_j;
            }
            let (j, n_j) = chosen.expect("index within total sequence count");
            out.push(self.alphabet[j]);
            counts[j] -= 1;
            remaining -= 1;
            n_rem = n_j;
        }
        Ok(AmplitudeBlock::new(out))
    }

    fn decode(&self, block: &AmplitudeBlock) -> Result<Vec<bool>> {
        if block.len() != self.block_len() {
            return Err(Error::LengthMismatch {
                expected: self.block_len(),
                got: block.len(),
                context: "ccdm decode block",
            });
        }
        if block.composition(&self.alphabet)? != self.composition {
            return Err(Error::Codec(
                "block composition does not match the matcher composition".into(),
            ));
        }
        let mut counts = self.composition.counts.clone();
        let mut remaining = self.block_len();
        let mut n_rem = self.total_sequences.clone();
        let mut rank = BigUint::zero();
        for &a in &block.amplitudes {
            let actual = self
                .alphabet
                .iter()
                .position(|&x| x == a)
                .expect("composition check passed");
            let mut n_actual = BigUint::zero();
            for j in 0..=actual {
                if counts[j] == 0 {
                    continue;
                }
                let n_j = &n_rem * counts[j] / BigUint::from(remaining);
                if j < actual {
                    rank += &n_j;
                } else {
                    n_actual = n_j;
                }
            }
            counts[actual] -= 1;
            remaining -= 1;
            n_rem = n_actual;
        }
        if rank.bits() as usize > self.capacity_bits {
            return Err(Error::Codec(
                "block rank exceeds the CCDM code range (not a codeword)".into(),
            ));
        }
        Ok(biguint_to_bits(&rank, self.capacity_bits))
    }
}

/// Exact multinomial coefficient `(Σ counts)! / Π countsᵢ!`.
pub fn multinomial(counts: &[usize]) -> BigUint {
    let mut result = BigUint::one();
    let mut n = 0usize;
    for &c in counts {
        n += c;
        result *= binomial(n, c);
    }
    result
}

/// Exact binomial coefficient.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut r = BigUint::one();
    for i in 1..=k {
        r = r * BigUint::from(n - k + i) / BigUint::from(i);
    }
    r
}
