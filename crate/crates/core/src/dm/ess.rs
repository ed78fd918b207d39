//! Enumerative sphere shaping (ESS) and its fourth-moment-limited variant
//! (K-ESS).
//!
//! The shaper trellis counts, per position and accumulated energy (and
//! accumulated fourth moment for K-ESS), how many admissible completions
//! remain. Counts are exact 192-bit integers; encoding and decoding are
//! plain enumerative (un)ranking over the trellis, ordered lexicographically
//! by alphabet index.
//!
//! Energy levels use the raw odd-integer alphabet so all trellis state is
//! small-integer arithmetic. Accumulated sums live on a lattice
//! `i·min + step·q`, which keeps the tables dense without waste.

use super::{AmplitudeBlock, AmplitudeShaper};
use crate::error::{Error, Result};
use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

/// Fixed-width 192-bit unsigned counter, little-endian limbs.
///
/// Node counts for the shapers used here stay far below 2^192; construction
/// fails loudly on overflow rather than silently wrapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct U192([u64; 3]);

impl U192 {
    pub const ZERO: U192 = U192([0, 0, 0]);
    pub const ONE: U192 = U192([1, 0, 0]);

    pub fn is_zero(&self) -> bool {
        self.0 == [0, 0, 0]
    }

    pub fn checked_add(self, rhs: U192) -> Option<U192> {
        let mut out = [0u64; 3];
        let mut carry = 0u64;
        for i in 0..3 {
            let (s1, c1) = self.0[i].overflowing_add(rhs.0[i]);
            let (s2, c2) = s1.overflowing_add(carry);
            out[i] = s2;
            carry = (c1 as u64) + (c2 as u64);
        }
        if carry != 0 {
            None
        } else {
            Some(U192(out))
        }
    }

    /// Saturating-free subtraction; caller guarantees `self >= rhs`.
    pub fn sub(self, rhs: U192) -> U192 {
        debug_assert!(self >= rhs);
        let mut out = [0u64; 3];
        let mut borrow = 0u64;
        for i in 0..3 {
            let (d1, b1) = self.0[i].overflowing_sub(rhs.0[i]);
            let (d2, b2) = d1.overflowing_sub(borrow);
            out[i] = d2;
            borrow = (b1 as u64) + (b2 as u64);
        }
        U192(out)
    }

    /// Bit length (position of the highest set bit plus one).
    pub fn bits(&self) -> u32 {
        for i in (0..3).rev() {
            if self.0[i] != 0 {
                return 64 * i as u32 + (64 - self.0[i].leading_zeros());
            }
        }
        0
    }

    pub fn to_biguint(self) -> BigUint {
        let mut bytes = Vec::with_capacity(24);
        for limb in self.0 {
            bytes.extend_from_slice(&limb.to_le_bytes());
        }
        BigUint::from_bytes_le(&bytes)
    }

    pub fn from_biguint(x: &BigUint) -> Option<U192> {
        if x.bits() > 192 {
            return None;
        }
        let bytes = x.to_bytes_le();
        let mut limbs = [0u64; 3];
        for (i, chunk) in bytes.chunks(8).enumerate() {
            let mut b = [0u8; 8];
            b[..chunk.len()].copy_from_slice(chunk);
            limbs[i] = u64::from_le_bytes(b);
        }
        Some(U192(limbs))
    }

    /// `bits` MSB first; at most 192 of them.
    pub fn from_bits(bits: &[bool]) -> Option<U192> {
        if bits.len() > 192 {
            return None;
        }
        let mut v = U192::ZERO;
        for (i, &b) in bits.iter().rev().enumerate() {
            if b {
                v.0[i / 64] |= 1u64 << (i % 64);
            }
        }
        Some(v)
    }

    pub fn to_bits(self, n: usize) -> Vec<bool> {
        assert!(self.bits() as usize <= n);
        (0..n)
            .rev()
            .map(|i| (self.0[i / 64] >> (i % 64)) & 1 == 1)
            .collect()
    }
}

impl PartialOrd for U192 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for U192 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        for i in (0..3).rev() {
            match self.0[i].cmp(&other.0[i]) {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        std::cmp::Ordering::Equal
    }
}

/// Rectangular count table at one trellis position.
#[derive(Debug, Clone)]
struct PositionTable {
    e_lo: u64,
    n_e: usize,
    m_lo: u64,
    n_m: usize,
    counts: Vec<U192>,
}

impl PositionTable {
    fn empty() -> Self {
        Self {
            e_lo: 0,
            n_e: 0,
            m_lo: 0,
            n_m: 0,
            counts: Vec::new(),
        }
    }

    fn get(&self, e_step: u64, m_step: u64, e: u64, m: u64) -> U192 {
        if self.n_e == 0 || e < self.e_lo || m < self.m_lo {
            return U192::ZERO;
        }
        let de = e - self.e_lo;
        let dm = m - self.m_lo;
        debug_assert_eq!(de % e_step, 0);
        debug_assert_eq!(dm % m_step, 0);
        let ie = (de / e_step) as usize;
        let im = (dm / m_step) as usize;
        if ie >= self.n_e || im >= self.n_m {
            return U192::ZERO;
        }
        self.counts[ie * self.n_m + im]
    }
}

/// ESS / K-ESS shaper trellis.
#[derive(Debug, Clone)]
pub struct EssTrellis {
    len: usize,
    alphabet: Vec<u32>,
    squares: Vec<u64>,
    fourths: Vec<u64>,
    e_max: u64,
    m4_max: Option<u64>,
    e_step: u64,
    m_step: u64,
    tables: Vec<PositionTable>,
    capacity_bits: usize,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lattice_step(values: &[u64]) -> u64 {
    let mut g = 0u64;
    for &v in &values[1..] {
        g = gcd(g, v - values[0]);
    }
    g.max(1)
}

/// Builds the count trellis for sequences with `Σ a² ≤ e_max` (and
/// `Σ a⁴ ≤ m4_max` when given). Fails with an empty-codebook error when no
/// sequence is admissible.
pub fn build_ess_trellis(
    len: usize,
    alphabet: &[u32],
    e_max: u64,
    m4_max: Option<u64>,
) -> Result<EssTrellis> {
    if len == 0 {
        return Err(Error::Domain("blocklength must be >= 1".into()));
    }
    if alphabet.is_empty() || alphabet.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("alphabet must be nonempty and strictly increasing".into()));
    }
    let squares: Vec<u64> = alphabet.iter().map(|&a| (a as u64).pow(2)).collect();
    // Without a fourth-moment cap the m-coordinate is inert; zeroing the
    // increments collapses it to a single level.
    let fourths: Vec<u64> = if m4_max.is_some() {
        alphabet.iter().map(|&a| (a as u64).pow(4)).collect()
    } else {
        vec![0; alphabet.len()]
    };
    let e_step = lattice_step(&squares);
    let m_step = if m4_max.is_some() { lattice_step(&fourths) } else { 1 };

    let trellis = EssTrellis::build(len, alphabet.to_vec(), squares, fourths, e_max, m4_max, e_step, m_step)?;
    Ok(trellis)
}

impl EssTrellis {
    #[allow(clippy::too_many_arguments)]
    fn build(
        len: usize,
        alphabet: Vec<u32>,
        squares: Vec<u64>,
        fourths: Vec<u64>,
        e_max: u64,
        m4_max: Option<u64>,
        e_step: u64,
        m_step: u64,
    ) -> Result<Self> {
        let s_min = squares[0];
        let s_max = *squares.last().unwrap();
        let f_min = fourths[0];
        let f_max = *fourths.last().unwrap();

        let range = |i: usize, vmin: u64, vmax: u64, cap: u64, step: u64| -> (u64, usize) {
            let lo = i as u128 * vmin as u128;
            let remaining = (len - i) as u128 * vmin as u128;
            let cap_budget = cap as i128 - remaining as i128;
            let hi = (i as u128 * vmax as u128).min(cap_budget.max(-1) as u128);
            if cap_budget < lo as i128 {
                return (lo as u64, 0);
            }
            let n = ((hi - lo) / step as u128) as usize + 1;
            (lo as u64, n)
        };

        let mut tables: Vec<PositionTable> = Vec::with_capacity(len + 1);
        for i in 0..=len {
            let (e_lo, n_e) = range(i, s_min, s_max, e_max, e_step);
            let (m_lo, n_m) = match m4_max {
                Some(cap) => range(i, f_min, f_max, cap, m_step),
                None => (0, 1),
            };
            if n_e == 0 || n_m == 0 {
                tables.push(PositionTable::empty());
            } else {
                tables.push(PositionTable {
                    e_lo,
                    n_e,
                    m_lo,
                    n_m,
                    counts: vec![U192::ZERO; n_e * n_m],
                });
            }
        }

        // Terminal position: every in-range state is one admissible sequence.
        for c in tables[len].counts.iter_mut() {
            *c = U192::ONE;
        }

        for i in (0..len).rev() {
            let (head, tail) = tables.split_at_mut(i + 1);
            let cur = &mut head[i];
            let next = &tail[0];
            for ie in 0..cur.n_e {
                let e = cur.e_lo + ie as u64 * e_step;
                for im in 0..cur.n_m {
                    let m = cur.m_lo + im as u64 * m_step;
                    let mut total = U192::ZERO;
                    for j in 0..squares.len() {
                        let c = next.get(e_step, m_step, e + squares[j], m + fourths[j]);
                        total = total.checked_add(c).ok_or_else(|| {
                            Error::Config("trellis count overflow (blocklength too large for 192-bit counts)".into())
                        })?;
                    }
                    cur.counts[ie * cur.n_m + im] = total;
                }
            }
        }

        let total = tables[0].get(e_step, m_step, 0, 0);
        if total.is_zero() {
            return Err(Error::EmptyCodebook(format!(
                "no sequence satisfies e_max = {e_max}, m4_max = {m4_max:?}"
            )));
        }
        let capacity_bits = total.bits() as usize - 1;
        Ok(Self {
            len,
            alphabet,
            squares,
            fourths,
            e_max,
            m4_max,
            e_step,
            m_step,
            tables,
            capacity_bits,
        })
    }

    pub fn alphabet(&self) -> &[u32] {
        &self.alphabet
    }

    pub fn e_max(&self) -> u64 {
        self.e_max
    }

    pub fn m4_max(&self) -> Option<u64> {
        self.m4_max
    }

    /// Exact number of admissible sequences.
    pub fn total_sequences(&self) -> BigUint {
        self.tables[0].get(self.e_step, self.m_step, 0, 0).to_biguint()
    }

    fn count(&self, pos: usize, e: u64, m: u64) -> U192 {
        self.tables[pos].get(self.e_step, self.m_step, e, m)
    }

    /// Serializes the trellis to a versioned JSON cache with node counts as
    /// decimal strings. Intended for small trellises.
    pub fn to_json(&self) -> String {
        let positions = self
            .tables
            .iter()
            .map(|t| PositionCache {
                e_lo: t.e_lo,
                n_e: t.n_e,
                m_lo: t.m_lo,
                n_m: t.n_m,
                counts: t.counts.iter().map(|c| c.to_biguint().to_string()).collect(),
            })
            .collect();
        let cache = TrellisCache {
            version: TrellisCache::VERSION,
            len: self.len,
            alphabet: self.alphabet.clone(),
            e_max: self.e_max,
            m4_max: self.m4_max,
            positions,
        };
        serde_json::to_string(&cache).expect("trellis cache serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let cache: TrellisCache = serde_json::from_str(json)?;
        if cache.version != TrellisCache::VERSION {
            return Err(Error::Serde(format!(
                "trellis cache version {} unsupported",
                cache.version
            )));
        }
        let squares: Vec<u64> = cache.alphabet.iter().map(|&a| (a as u64).pow(2)).collect();
        let fourths: Vec<u64> = if cache.m4_max.is_some() {
            cache.alphabet.iter().map(|&a| (a as u64).pow(4)).collect()
        } else {
            vec![0; cache.alphabet.len()]
        };
        let e_step = lattice_step(&squares);
        let m_step = if cache.m4_max.is_some() { lattice_step(&fourths) } else { 1 };
        let mut tables = Vec::with_capacity(cache.positions.len());
        for p in &cache.positions {
            if p.counts.len() != p.n_e * p.n_m {
                return Err(Error::Serde("trellis cache table size mismatch".into()));
            }
            let counts = p
                .counts
                .iter()
                .map(|s| {
                    let big = s
                        .parse::<BigUint>()
                        .map_err(|e| Error::Serde(format!("bad count: {e}")))?;
                    U192::from_biguint(&big).ok_or_else(|| Error::Serde("count exceeds 192 bits".into()))
                })
                .collect::<Result<Vec<_>>>()?;
            tables.push(PositionTable {
                e_lo: p.e_lo,
                n_e: p.n_e,
                m_lo: p.m_lo,
                n_m: p.n_m,
                counts,
            });
        }
        let total = tables[0].get(e_step, m_step, 0, 0);
        if total.is_zero() {
            return Err(Error::EmptyCodebook("cached trellis is empty".into()));
        }
        Ok(Self {
            len: cache.len,
            capacity_bits: total.bits() as usize - 1,
            alphabet: cache.alphabet,
            squares,
            fourths,
            e_max: cache.e_max,
            m4_max: cache.m4_max,
            e_step,
            m_step,
            tables,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct TrellisCache {
    version: u32,
    len: usize,
    alphabet: Vec<u32>,
    e_max: u64,
    m4_max: Option<u64>,
    positions: Vec<PositionCache>,
}

impl TrellisCache {
    const VERSION: u32 = 1;
}

#[derive(Serialize, Deserialize)]
struct PositionCache {
    e_lo: u64,
    n_e: usize,
    m_lo: u64,
    n_m: usize,
    counts: Vec<String>,
}

impl AmplitudeShaper for EssTrellis {
    fn block_len(&self) -> usize {
        self.len
    }

    fn capacity_bits(&self) -> usize {
        self.capacity_bits
    }

    fn encode(&self, bits: &[bool]) -> Result<AmplitudeBlock> {
        if bits.len() != self.capacity_bits {
            return Err(Error::LengthMismatch {
                expected: self.capacity_bits,
                got: bits.len(),
                context: "ess encode input bits",
            });
        }
        let mut index = U192::from_bits(bits).expect("capacity < 192 bits");
        let mut e = 0u64;
        let mut m = 0u64;
        let mut out = Vec::with_capacity(self.len);
        for pos in 0..self.len {
            let mut chosen = None;
            for j in 0..self.alphabet.len() {
                let c = self.count(pos + 1, e + self.squares[j], m + self.fourths[j]);
                if index < c {
                    chosen = Some(j);
                    break;
                }
                index = index.sub(c);
            }
            let j = chosen.expect("index below total count");
            out.push(self.alphabet[j]);
            e += self.squares[j];
            m += self.fourths[j];
        }
        debug_assert!(index.is_zero());
        Ok(AmplitudeBlock::new(out))
    }

    fn decode(&self, block: &AmplitudeBlock) -> Result<Vec<bool>> {
        if block.len() != self.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                got: block.len(),
                context: "ess decode block",
            });
        }
        let mut e = 0u64;
        let mut m = 0u64;
        let mut rank = U192::ZERO;
        for (pos, &a) in block.amplitudes.iter().enumerate() {
            let actual = self
                .alphabet
                .iter()
                .position(|&x| x == a)
                .ok_or_else(|| Error::Codec(format!("amplitude {a} not in alphabet")))?;
            for j in 0..actual {
                let c = self.count(pos + 1, e + self.squares[j], m + self.fourths[j]);
                rank = rank
                    .checked_add(c)
                    .ok_or_else(|| Error::Codec("rank overflow".into()))?;
            }
            let c_actual = self.count(pos + 1, e + self.squares[actual], m + self.fourths[actual]);
            if c_actual.is_zero() {
                return Err(Error::Codec(format!(
                    "block violates the shaping bounds at position {pos}"
                )));
            }
            e += self.squares[actual];
            m += self.fourths[actual];
        }
        if rank.bits() as usize > self.capacity_bits {
            return Err(Error::Codec(
                "block rank exceeds the ESS code range (not a codeword)".into(),
            ));
        }
        Ok(rank.to_bits(self.capacity_bits))
    }
}

/// Number of sequences with `Σ a² ≤ e_max` via a one-dimensional DP in exact
/// big-integer arithmetic. Used for bound searches where counts may exceed
/// 192 bits.
fn count_energy_bounded(len: usize, squares: &[u64], e_max: u64) -> BigUint {
    let s_min = squares[0];
    if e_max < len as u64 * s_min {
        return BigUint::zero();
    }
    let e_step = lattice_step(squares);
    // Forward over positions; counts[q] = #prefixes with energy s_min*i + q*step
    // that can still finish under the cap.
    let budget = e_max - len as u64 * s_min; // slack beyond the all-min sequence
    let n_q = (budget / e_step) as usize + 1;
    let mut col = vec![BigUint::zero(); n_q];
    col[0] = BigUint::from(1u8);
    for _ in 0..len {
        let mut next = vec![BigUint::zero(); n_q];
        for (q, c) in col.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for &s in squares {
                let dq = (s - s_min) / e_step;
                let Some(nq) = q.checked_add(dq as usize) else { continue };
                if nq < n_q {
                    next[nq] += c;
                }
            }
        }
        col = next;
    }
    col.into_iter().sum()
}

/// Smallest `e_max` (on the energy lattice) whose ESS codebook holds at least
/// `target_bits` bits. Ties on capacity resolve to the smaller bound.
pub fn min_e_max_for_capacity(len: usize, alphabet: &[u32], target_bits: usize) -> Result<u64> {
    let squares: Vec<u64> = alphabet.iter().map(|&a| (a as u64).pow(2)).collect();
    let e_step = lattice_step(&squares);
    let lo0 = len as u64 * squares[0];
    let hi0 = len as u64 * squares[squares.len() - 1];
    let capacity = |e_max: u64| -> i64 {
        let n = count_energy_bounded(len, &squares, e_max);
        if n.is_zero() {
            -1
        } else {
            n.bits() as i64 - 1
        }
    };
    if capacity(hi0) < target_bits as i64 {
        return Err(Error::Domain(format!(
            "alphabet cannot carry {target_bits} bits over {len} amplitudes"
        )));
    }
    let mut lo = lo0; // capacity(lo) may already suffice when target is 0
    let mut hi = hi0;
    if capacity(lo) >= target_bits as i64 {
        return Ok(lo);
    }
    while hi - lo > e_step {
        let mid = lo + (hi - lo) / (2 * e_step) * e_step;
        if capacity(mid) >= target_bits as i64 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Builds a K-ESS trellis carrying `target_bits` per block: the fourth-moment
/// cap is set to discard `discard_num/discard_den` of the highest-`Σa⁴`
/// sequences of the rate-matched ESS codebook, then the energy bound grows
/// (cap held fixed) until the capacity is restored.
pub fn build_kess_for_rate(
    len: usize,
    alphabet: &[u32],
    target_bits: usize,
    discard_num: u64,
    discard_den: u64,
) -> Result<EssTrellis> {
    if discard_den == 0 || discard_num >= discard_den {
        return Err(Error::Domain("discard fraction must be in [0, 1)".into()));
    }
    let e0 = min_e_max_for_capacity(len, alphabet, target_bits)?;
    let m4_max = fourth_moment_quantile(len, alphabet, e0, discard_den - discard_num, discard_den)?;
    let squares: Vec<u64> = alphabet.iter().map(|&a| (a as u64).pow(2)).collect();
    let e_step = lattice_step(&squares);
    let mut e_max = e0;
    for _ in 0..4096 {
        let trellis = build_ess_trellis(len, alphabet, e_max, Some(m4_max))?;
        if trellis.capacity_bits() >= target_bits {
            return Ok(trellis);
        }
        e_max += e_step;
    }
    Err(Error::Config(format!(
        "could not restore {target_bits} bits under fourth-moment cap {m4_max}"
    )))
}

/// Smallest lattice value `M` such that at least `keep_num/keep_den` of the
/// sequences with `Σ a² ≤ e_max` satisfy `Σ a⁴ ≤ M`.
pub fn fourth_moment_quantile(
    len: usize,
    alphabet: &[u32],
    e_max: u64,
    keep_num: u64,
    keep_den: u64,
) -> Result<u64> {
    let squares: Vec<u64> = alphabet.iter().map(|&a| (a as u64).pow(2)).collect();
    let fourths: Vec<u64> = alphabet.iter().map(|&a| (a as u64).pow(4)).collect();
    let s_min = squares[0];
    let f_min = fourths[0];
    let f_max = *fourths.last().unwrap();
    if e_max < len as u64 * s_min {
        return Err(Error::EmptyCodebook("energy bound below the all-min sequence".into()));
    }
    let e_step = lattice_step(&squares);
    let m_step = lattice_step(&fourths);
    let n_e = ((e_max - len as u64 * s_min) / e_step) as usize + 1;
    let n_m = ((len as u64 * (f_max - f_min)) / m_step) as usize + 1;
    if n_e.saturating_mul(n_m) > 200_000_000 {
        return Err(Error::Config(
            "fourth-moment histogram too large for this alphabet/blocklength".into(),
        ));
    }

    // Forward DP over (energy slack, fourth-moment offset); big-integer safe
    // because every feasible prefix extends to at least one full sequence.
    let idx = |qe: usize, qm: usize| qe * n_m + qm;
    let mut col = vec![BigUint::zero(); n_e * n_m];
    col[0] = BigUint::from(1u8);
    for _ in 0..len {
        let mut next = vec![BigUint::zero(); n_e * n_m];
        for qe in 0..n_e {
            for qm in 0..n_m {
                let c = &col[idx(qe, qm)];
                if c.is_zero() {
                    continue;
                }
                for j in 0..squares.len() {
                    let dqe = ((squares[j] - s_min) / e_step) as usize;
                    let dqm = ((fourths[j] - f_min) / m_step) as usize;
                    if qe + dqe < n_e && qm + dqm < n_m {
                        next[idx(qe + dqe, qm + dqm)] += c;
                    }
                }
            }
        }
        col = next;
    }

    // Histogram over the fourth moment, marginalized over energies.
    let mut hist = vec![BigUint::zero(); n_m];
    for qe in 0..n_e {
        for qm in 0..n_m {
            let c = &col[idx(qe, qm)];
            if !c.is_zero() {
                hist[qm] += c;
            }
        }
    }
    let total: BigUint = hist.iter().sum();
    if total.is_zero() {
        return Err(Error::EmptyCodebook("no admissible sequence".into()));
    }
    let threshold = &total * keep_num;
    let mut cdf = BigUint::zero();
    for (qm, h) in hist.iter().enumerate() {
        cdf += h;
        if &cdf * keep_den >= threshold {
            return Ok(len as u64 * f_min + qm as u64 * m_step);
        }
    }
    unreachable!("cdf reaches total");
}
