//! Sequence selection: flipping-bit candidate generation, the LSAS and EDI
//! metrics, per-frame selection and the greedy per-subchannel WDM pass.
//!
//! `v` flipping bits are prepended (as most significant bits) to the `k - v`
//! information bits of each shaper invocation; every flipping pattern yields
//! one candidate block, and the selector keeps the candidate whose metric is
//! smallest. Decoding a selected block and dropping the first `v` bits
//! always recovers the information bits.

use crate::constellation::ShapedConstellation;
use crate::dm::{AmplitudeBlock, AmplitudeShaper};
use crate::error::{Error, Result};
use crate::mapping::{blocks_per_frame, map_blocks, AmplitudeFrame, MappingDim, PolMode};
use crate::nli::distortion::{apply_taps, Edge};
use crate::nli::{NliFilterBank, Pol, PolPair};
use crate::util::mean;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Polarizations entering both LSAS sums (outer over p, inner over p').
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolSet {
    X,
    Y,
    Both,
}

impl PolSet {
    pub fn pols(self) -> &'static [Pol] {
        match self {
            PolSet::X => &[Pol::X],
            PolSet::Y => &[Pol::Y],
            PolSet::Both => &[Pol::X, Pol::Y],
        }
    }
}

/// LSAS metric configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsasConfig {
    /// Subchannel offsets entering the metric (relative to the channel of
    /// interest). Adjacent channels dominate the interference, so the
    /// default is `[-1, 0, 1]`.
    pub channels: Vec<i32>,
    pub pols: PolSet,
}

impl Default for LsasConfig {
    fn default() -> Self {
        Self { channels: vec![-1, 0, 1], pols: PolSet::Both }
    }
}

/// Selection metric choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    /// No selection (v must be 0 or candidates are scored as equal).
    None,
    /// Energy dispersion index with the given (even) window length.
    Edi { window: usize },
    Lsas(LsasConfig),
}

/// Candidate generation and selection parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub flipping_bits: u32,
    pub dim: MappingDim,
    pub metric: SelectionMetric,
    /// Search all flipping-pattern combinations of the frame's shapers
    /// jointly instead of per-shaper against the pattern-0 baseline.
    pub joint: bool,
}

impl SelectionConfig {
    /// Joint candidate count per frame: `2^((components/d)·v)`.
    pub fn candidate_count_per_frame(&self, pol: PolMode) -> u128 {
        let shapers = (pol.components() / self.dim.as_usize()) as u32;
        1u128 << (shapers * self.flipping_bits)
    }
}

/// All `2^v` candidate blocks for one shaper invocation: flipping pattern
/// `f` (MSB-first) prepended to the information bits.
pub fn enumerate_candidates(
    shaper: &dyn AmplitudeShaper,
    info_bits: &[bool],
    v: u32,
) -> Result<Vec<AmplitudeBlock>> {
    let k = shaper.capacity_bits();
    if (v as usize) > k {
        return Err(Error::Domain(format!("v = {v} exceeds shaper capacity {k}")));
    }
    if info_bits.len() != k - v as usize {
        return Err(Error::LengthMismatch {
            expected: k - v as usize,
            got: info_bits.len(),
            context: "selection info bits",
        });
    }
    let mut out = Vec::with_capacity(1 << v);
    for pattern in 0u64..(1 << v) {
        let mut bits = Vec::with_capacity(k);
        for b in (0..v).rev() {
            bits.push((pattern >> b) & 1 == 1);
        }
        bits.extend_from_slice(info_bits);
        out.push(shaper.encode(&bits)?);
    }
    Ok(out)
}

/// Mean-removed neighbor energy sequences for the LSAS cross-channel terms,
/// keyed by relative channel offset. Channels not present are treated as
/// transmitting at their mean energy (zero variation).
#[derive(Debug, Clone, Default)]
pub struct NeighborContext {
    pub delta_e: BTreeMap<i32, (Vec<f64>, Vec<f64>)>,
}

impl NeighborContext {
    pub fn empty() -> Self {
        Self::default()
    }
}

/// LSAS metric of one candidate frame:
/// `λ = Σ_n Σ_{p∈𝒫} | s_p(n) · Σ_{p'∈𝒫} Σ_{c'∈𝒞̃} ΔD_{p,p'}(n) |²`.
///
/// Own-channel variations come from the candidate itself (empirical
/// per-frame means); neighbor variations come from `neighbors`.
pub fn lsas(
    frame: &AmplitudeFrame,
    constellation: &ShapedConstellation,
    bank: &NliFilterBank,
    cfg: &LsasConfig,
    neighbors: &NeighborContext,
) -> Result<f64> {
    let scale = constellation.scale();
    let e_x = frame.energy_x(scale);
    let e_y = frame.energy_y(scale);
    let n = frame.len();
    let centered = |e: &[f64]| {
        let m = mean(e);
        e.iter().map(|&v| v - m).collect::<Vec<f64>>()
    };
    let own = (centered(&e_x), centered(&e_y));

    let mut lambda = 0.0;
    for &p in cfg.pols.pols() {
        let mut inner = vec![0.0; n];
        for &p_prime in cfg.pols.pols() {
            for &c in &cfg.channels {
                let pair = if p_prime == p { PolPair::Intra } else { PolPair::Inter };
                let taps = bank.taps(c, pair).ok_or_else(|| {
                    Error::MissingData(format!("no taps for channel offset {c} ({pair:?})"))
                })?;
                let de: Option<&[f64]> = if c == 0 {
                    Some(match p_prime {
                        Pol::X => &own.0,
                        Pol::Y => &own.1,
                    })
                } else {
                    neighbors.delta_e.get(&c).map(|(x, y)| match p_prime {
                        Pol::X => x.as_slice(),
                        Pol::Y => y.as_slice(),
                    })
                };
                let Some(de) = de else { continue };
                if de.len() != n {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        got: de.len(),
                        context: "neighbor energy window",
                    });
                }
                let dd = apply_taps(de, taps, Edge::MeanPadded);
                for (acc, d) in inner.iter_mut().zip(&dd) {
                    *acc += d;
                }
            }
        }
        let e_p = match p {
            Pol::X => &e_x,
            Pol::Y => &e_y,
        };
        for (e, d) in e_p.iter().zip(&inner) {
            lambda += e * d * d;
        }
    }
    Ok(lambda)
}

/// Energy dispersion index of one symbol-energy sequence with an even
/// window `w`: the empirical variance of the windowed mean-removed energy
/// sums over the positions where the window fits.
pub fn edi(energy: &[f64], window: usize) -> Result<f64> {
    let l = energy.len();
    let w = window;
    if w == 0 || w % 2 != 0 {
        return Err(Error::Domain(format!("EDI window must be even and positive, got {w}")));
    }
    if l <= w + 1 {
        return Err(Error::Domain(format!(
            "EDI needs blocklength > window + 1 ({l} <= {})",
            w + 1
        )));
    }
    let h = w / 2;
    // Empirical mean over the inner positions only.
    let inner = &energy[h..l - h];
    let e_tilde = mean(inner);
    let mut acc = 0.0;
    for n in h..l - h {
        let mut de = 0.0;
        for m in n - h..=n + h {
            de += energy[m] - e_tilde;
        }
        acc += de * de;
    }
    Ok(acc / (l - w - 1) as f64)
}

/// Index of the smallest score; ties resolve to the lowest index (lowest
/// flipping-bit pattern).
pub fn select_argmin(scores: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s < scores[best] {
            best = i;
        }
    }
    best
}

/// One selection decision, for JSON-lines audit logs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionLogEntry {
    pub channel_offset: i32,
    pub frame_index: usize,
    /// Shaper slot within the frame (0 for joint selection).
    pub slot: usize,
    pub scores: Vec<f64>,
    pub chosen_pattern: u64,
}

/// Writes selection log entries as JSON lines.
pub fn write_selection_log<W: std::io::Write>(
    entries: &[SelectionLogEntry],
    mut writer: W,
) -> Result<()> {
    for e in entries {
        serde_json::to_writer(&mut writer, e)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Per-frame candidate selection for one subchannel.
pub struct FrameSelector<'a> {
    pub shaper: &'a dyn AmplitudeShaper,
    pub constellation: &'a ShapedConstellation,
    pub pol_mode: PolMode,
    pub config: &'a SelectionConfig,
    /// Filter bank; required for the LSAS metric.
    pub bank: Option<&'a NliFilterBank>,
}

impl<'a> FrameSelector<'a> {
    pub fn shapers_per_frame(&self) -> Result<usize> {
        blocks_per_frame(self.pol_mode, self.config.dim)
    }

    /// Selects the frame for one slot. `info_bits` holds `k - v` bits per
    /// shaper; `frame_index` only labels log entries.
    pub fn select_frame(
        &self,
        info_bits: &[Vec<bool>],
        neighbors: &NeighborContext,
        channel_offset: i32,
        frame_index: usize,
    ) -> Result<(AmplitudeFrame, Vec<SelectionLogEntry>)> {
        let n_shapers = self.shapers_per_frame()?;
        if info_bits.len() != n_shapers {
            return Err(Error::LengthMismatch {
                expected: n_shapers,
                got: info_bits.len(),
                context: "info bit groups per frame",
            });
        }
        let v = self.config.flipping_bits;
        let candidates: Vec<Vec<AmplitudeBlock>> = info_bits
            .iter()
            .map(|bits| enumerate_candidates(self.shaper, bits, v))
            .collect::<Result<_>>()?;

        if v == 0 || matches!(self.config.metric, SelectionMetric::None) {
            let blocks: Vec<AmplitudeBlock> = candidates.iter().map(|c| c[0].clone()).collect();
            return Ok((map_blocks(&blocks, self.config.dim, self.pol_mode)?, Vec::new()));
        }

        if self.config.joint {
            self.select_joint(&candidates, neighbors, channel_offset, frame_index)
        } else {
            self.select_independent(&candidates, neighbors, channel_offset, frame_index)
        }
    }

    fn score(
        &self,
        blocks: &[AmplitudeBlock],
        slot: usize,
        neighbors: &NeighborContext,
    ) -> Result<f64> {
        match &self.config.metric {
            SelectionMetric::None => Ok(0.0),
            SelectionMetric::Lsas(cfg) => {
                let frame = map_blocks(blocks, self.config.dim, self.pol_mode)?;
                let bank = self
                    .bank
                    .ok_or_else(|| Error::Config("LSAS selection needs a filter bank".into()))?;
                lsas(&frame, self.constellation, bank, cfg, neighbors)
            }
            SelectionMetric::Edi { window } => {
                // EDI scores the candidate block through the energy sequence
                // of the components it owns.
                let d = self.config.dim.as_usize();
                let scale = self.constellation.scale();
                let block = &blocks[slot];
                let len = block.len() / d;
                let mut energy = vec![0.0; len];
                for (n, &a) in block.amplitudes.iter().enumerate() {
                    energy[n / d] += (a as f64 * scale).powi(2);
                }
                edi(&energy, *window)
            }
        }
    }

    fn select_independent(
        &self,
        candidates: &[Vec<AmplitudeBlock>],
        neighbors: &NeighborContext,
        channel_offset: i32,
        frame_index: usize,
    ) -> Result<(AmplitudeFrame, Vec<SelectionLogEntry>)> {
        // Every slot is scored against the pattern-0 baseline of the others.
        let baseline: Vec<AmplitudeBlock> = candidates.iter().map(|c| c[0].clone()).collect();
        let mut chosen = baseline.clone();
        let mut logs = Vec::new();
        for slot in 0..candidates.len() {
            let mut scores = Vec::with_capacity(candidates[slot].len());
            let mut trial = baseline.clone();
            for cand in &candidates[slot] {
                trial[slot] = cand.clone();
                scores.push(self.score(&trial, slot, neighbors)?);
            }
            let best = select_argmin(&scores);
            chosen[slot] = candidates[slot][best].clone();
            logs.push(SelectionLogEntry {
                channel_offset,
                frame_index,
                slot,
                scores,
                chosen_pattern: best as u64,
            });
        }
        Ok((map_blocks(&chosen, self.config.dim, self.pol_mode)?, logs))
    }

    fn select_joint(
        &self,
        candidates: &[Vec<AmplitudeBlock>],
        neighbors: &NeighborContext,
        channel_offset: i32,
        frame_index: usize,
    ) -> Result<(AmplitudeFrame, Vec<SelectionLogEntry>)> {
        let v = self.config.flipping_bits;
        let n_shapers = candidates.len();
        let total_bits = v as usize * n_shapers;
        if total_bits > 24 {
            return Err(Error::Config(format!(
                "joint search over 2^{total_bits} candidates is not tractable"
            )));
        }
        let mut scores = Vec::with_capacity(1usize << total_bits);
        // Combined pattern: slot 0 holds the most significant v bits.
        for combined in 0u64..(1 << total_bits) {
            let blocks: Vec<AmplitudeBlock> = (0..n_shapers)
                .map(|slot| {
                    let shift = v as u64 * (n_shapers - 1 - slot) as u64;
                    let pattern = (combined >> shift) & ((1 << v) - 1);
                    candidates[slot][pattern as usize].clone()
                })
                .collect();
            scores.push(self.score(&blocks, 0, neighbors)?);
        }
        let best = select_argmin(&scores) as u64;
        let blocks: Vec<AmplitudeBlock> = (0..n_shapers)
            .map(|slot| {
                let shift = v as u64 * (n_shapers - 1 - slot) as u64;
                let pattern = (best >> shift) & ((1 << v) - 1);
                candidates[slot][pattern as usize].clone()
            })
            .collect();
        let log = SelectionLogEntry {
            channel_offset,
            frame_index,
            slot: 0,
            scores,
            chosen_pattern: best,
        };
        Ok((map_blocks(&blocks, self.config.dim, self.pol_mode)?, vec![log]))
    }
}

/// Processing order for greedy WDM selection: outer channels first, ties
/// (mirror pairs) lower offset first.
pub fn channel_processing_order(offsets: &[i32]) -> Vec<i32> {
    let mut v = offsets.to_vec();
    v.sort_by_key(|&c| (std::cmp::Reverse(c.abs()), c));
    v
}

/// Greedy per-subchannel selection for one frame window: channels are
/// processed from outer to inner; each channel's metric sees the already
/// selected neighbors' mean-removed energies, and mean energy (zero
/// variation) for channels not yet selected. The candidate count per
/// channel matches the single-channel case.
pub fn greedy_wdm_select(
    selector: &FrameSelector,
    per_channel_bits: &BTreeMap<i32, Vec<Vec<bool>>>,
    frame_index: usize,
) -> Result<(BTreeMap<i32, AmplitudeFrame>, Vec<SelectionLogEntry>)> {
    let offsets: Vec<i32> = per_channel_bits.keys().copied().collect();
    let order = channel_processing_order(&offsets);
    let lsas_channels: Vec<i32> = match &selector.config.metric {
        SelectionMetric::Lsas(cfg) => cfg.channels.clone(),
        _ => vec![0],
    };
    let mut chosen: BTreeMap<i32, AmplitudeFrame> = BTreeMap::new();
    let mut logs = Vec::new();
    let scale = selector.constellation.scale();
    for &c in &order {
        // Fixed neighbors, re-keyed relative to this channel.
        let mut neighbors = NeighborContext::empty();
        for (&c_sel, frame) in &chosen {
            let rel = c_sel - c;
            if rel != 0 && lsas_channels.contains(&rel) {
                let center = |e: Vec<f64>| {
                    let m = mean(&e);
                    e.into_iter().map(|v| v - m).collect::<Vec<f64>>()
                };
                neighbors
                    .delta_e
                    .insert(rel, (center(frame.energy_x(scale)), center(frame.energy_y(scale))));
            }
        }
        let (frame, mut l) =
            selector.select_frame(&per_channel_bits[&c], &neighbors, c, frame_index)?;
        chosen.insert(c, frame);
        logs.append(&mut l);
    }
    Ok((chosen, logs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::fit_mb_lambda;
    use crate::dm::{ccdm::Ccdm, quantize_composition};
    use crate::fiber::config::{link_setup1, LinkSystemConfig};
    use crate::nli::filter::{build_filter_bank, FilterTaps};
    use crate::nli::kernel::{compute_kernel, KernelOptions};
    use crate::util::seeded_rng;
    use rand::Rng;

    fn test_shaper(len: usize) -> Ccdm {
        let alphabet = [1u32, 3, 5, 7];
        let dist = fit_mb_lambda(1.6, &alphabet).unwrap();
        Ccdm::new(&alphabet, quantize_composition(&dist, len)).unwrap()
    }

    fn test_bank(offsets: &[i32]) -> NliFilterBank {
        let link = LinkSystemConfig { n_spans: 2, n_channels: 3, ..link_setup1() };
        let kernels: Vec<_> = offsets
            .iter()
            .map(|&c| compute_kernel(&link, c, &KernelOptions::default()).unwrap())
            .collect();
        build_filter_bank(&kernels, link.gamma_per_w_m(), 1e-4).unwrap()
    }

    fn random_bits(n: usize, seed: u64) -> Vec<bool> {
        let mut rng = seeded_rng(seed);
        (0..n).map(|_| rng.gen()).collect()
    }

    #[test]
    fn candidate_counts() {
        let shaper = test_shaper(16);
        let k = shaper.capacity_bits();
        let info = random_bits(k, 1);
        assert_eq!(enumerate_candidates(&shaper, &info, 0).unwrap().len(), 1);
        let info = random_bits(k - 2, 1);
        assert_eq!(enumerate_candidates(&shaper, &info, 2).unwrap().len(), 4);

        let cfg = SelectionConfig {
            flipping_bits: 2,
            dim: MappingDim::D4,
            metric: SelectionMetric::None,
            joint: false,
        };
        assert_eq!(cfg.candidate_count_per_frame(PolMode::Dual), 4);
        let cfg = SelectionConfig { dim: MappingDim::D1, ..cfg };
        assert_eq!(cfg.candidate_count_per_frame(PolMode::Dual), 256);
    }

    #[test]
    fn candidates_share_info_bits_after_decoding() {
        let shaper = test_shaper(20);
        let k = shaper.capacity_bits();
        let v = 3u32;
        let info = random_bits(k - v as usize, 7);
        let candidates = enumerate_candidates(&shaper, &info, v).unwrap();
        assert_eq!(candidates.len(), 8);
        for (pattern, cand) in candidates.iter().enumerate() {
            let bits = crate::dm::AmplitudeShaper::decode(&shaper, cand).unwrap();
            let (flips, rest) = bits.split_at(v as usize);
            assert_eq!(rest, &info[..]);
            let got: u64 = flips.iter().fold(0, |acc, &b| (acc << 1) | b as u64);
            assert_eq!(got, pattern as u64);
        }
    }

    #[test]
    fn edi_hand_checked_example() {
        // ℓ=6, w=2, E = (1,1,1,1,1,7): windows sums are 0,0,0,6 and the
        // normalizer is ℓ-w-1 = 3.
        let e = [1.0, 1.0, 1.0, 1.0, 1.0, 7.0];
        assert!((edi(&e, 2).unwrap() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn edi_constant_is_zero_and_errors() {
        assert_eq!(edi(&[2.0; 50], 10).unwrap(), 0.0);
        assert!(edi(&[1.0; 10], 10).is_err(), "l <= w+1");
        assert!(edi(&[1.0; 10], 3).is_err(), "odd window");
    }

    #[test]
    fn edi_equals_rectangular_lsas_reduction() {
        // With h(n) = 1 on |n| <= w/2 and the |s|² weight dropped, the LSAS
        // inner sum at valid positions is exactly ΔẼ(n); EDI is then the
        // normalized sum of squares. Build both from the same sequence.
        let mut rng = seeded_rng(11);
        let l = 64usize;
        let w = 8usize;
        let e: Vec<f64> = (0..l).map(|_| rng.gen_range(0.5..2.0)).collect();
        let lambda = edi(&e, w).unwrap();

        let h = w / 2;
        let inner = &e[h..l - h];
        let e_tilde = mean(inner);
        let de: Vec<f64> = e.iter().map(|&v| v - e_tilde).collect();
        let taps = FilterTaps { m_min: -(h as i64), taps: vec![1.0; w + 1] };
        let dd = apply_taps(&de, &taps, Edge::MeanPadded);
        let acc: f64 = dd[h..l - h].iter().map(|&v| v * v).sum();
        let reduced = acc / (l - w - 1) as f64;
        assert!((lambda - reduced).abs() < 1e-10 * lambda.max(1.0));
    }

    #[test]
    fn lsas_zero_for_constant_energy_frames() {
        // All-equal amplitudes give constant component energies, so every
        // mean-removed variation vanishes.
        let constellation = ShapedConstellation::new(2).unwrap();
        let bank = test_bank(&[0]);
        let blocks = vec![AmplitudeBlock::new(vec![3; 12]); 4];
        let frame = map_blocks(&blocks, MappingDim::D1, PolMode::Dual).unwrap();
        let cfg = LsasConfig { channels: vec![0], pols: PolSet::Both };
        let lambda = lsas(&frame, &constellation, &bank, &cfg, &NeighborContext::empty()).unwrap();
        assert!(lambda.abs() < 1e-20);
    }

    #[test]
    fn lsas_matches_naive_triple_loop_oracle() {
        let constellation = ShapedConstellation::new(3).unwrap();
        let bank = test_bank(&[-1, 0, 1]);
        let mut rng = seeded_rng(23);
        let len = 40usize;
        let blocks: Vec<AmplitudeBlock> = (0..4)
            .map(|_| AmplitudeBlock::new((0..len).map(|_| 2 * rng.gen_range(0..4u32) + 1).collect()))
            .collect();
        let frame = map_blocks(&blocks, MappingDim::D1, PolMode::Dual).unwrap();
        let mut neighbors = NeighborContext::empty();
        for &c in &[-1, 1] {
            let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            neighbors.delta_e.insert(c, (x, y));
        }
        let cfg = LsasConfig { channels: vec![-1, 0, 1], pols: PolSet::Both };
        let got = lsas(&frame, &constellation, &bank, &cfg, &neighbors).unwrap();

        // Naive evaluation straight from the metric definition.
        let scale = constellation.scale();
        let e_x = frame.energy_x(scale);
        let e_y = frame.energy_y(scale);
        let centered = |e: &[f64]| {
            let m = mean(e);
            e.iter().map(|&v| v - m).collect::<Vec<f64>>()
        };
        let own = [centered(&e_x), centered(&e_y)];
        let mut oracle = 0.0;
        for p in 0..2usize {
            for n in 0..len {
                let mut acc = 0.0;
                for p_prime in 0..2usize {
                    for &c in &[-1i32, 0, 1] {
                        let pair = if p_prime == p { PolPair::Intra } else { PolPair::Inter };
                        let taps = bank.taps(c, pair).unwrap();
                        let de: &[f64] = if c == 0 {
                            &own[p_prime]
                        } else {
                            let (x, y) = &neighbors.delta_e[&c];
                            if p_prime == 0 { x } else { y }
                        };
                        for m in taps.m_min..=taps.m_max() {
                            let idx = n as i64 + m;
                            if idx >= 0 && (idx as usize) < len {
                                acc += de[idx as usize] * taps.tap(m);
                            }
                        }
                    }
                }
                let e = if p == 0 { e_x[n] } else { e_y[n] };
                oracle += e * acc * acc;
            }
        }
        assert!(
            (got - oracle).abs() <= 1e-10 * oracle.abs().max(1e-300),
            "got {got}, oracle {oracle}"
        );
    }

    #[test]
    fn lsas_single_tap_closed_form() {
        // With a single-tap δ filter on one channel and one polarization,
        // λ = Σ E(n)·(E(n) − Ē)².
        let constellation = ShapedConstellation::new(2).unwrap();
        let mut bank = test_bank(&[0]);
        // overwrite with a δ tap via the JSON path (keeps construction honest)
        let json = bank.to_json("t");
        let mut cache: serde_json::Value = serde_json::from_str(&json).unwrap();
        for e in cache["entries"].as_array_mut().unwrap() {
            e["m_min"] = serde_json::json!(0);
            e["taps"] = serde_json::json!([1.0]);
        }
        bank = NliFilterBank::from_json(&cache.to_string(), "t").unwrap();

        let mut rng = seeded_rng(3);
        let len = 32;
        let blocks = vec![
            AmplitudeBlock::new((0..len).map(|_| 2 * rng.gen_range(0..2u32) + 1).collect()),
            AmplitudeBlock::new((0..len).map(|_| 2 * rng.gen_range(0..2u32) + 1).collect()),
        ];
        let frame = map_blocks(&blocks, MappingDim::D1, PolMode::Single).unwrap();
        let cfg = LsasConfig { channels: vec![0], pols: PolSet::X };
        let got = lsas(&frame, &constellation, &bank, &cfg, &NeighborContext::empty()).unwrap();
        let e = frame.energy_x(1.0);
        let e_bar = mean(&e);
        let expect: f64 = e.iter().map(|&v| v * (v - e_bar) * (v - e_bar)).sum();
        assert!((got - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn argmin_and_scaling_invariance() {
        assert_eq!(select_argmin(&[3.0, 1.0, 2.0]), 1);
        assert_eq!(select_argmin(&[1.0]), 0);
        assert_eq!(select_argmin(&[2.0, 1.0, 1.0]), 1, "tie goes to lower pattern");

        // Scaling all symbol energies by α scales the single-tap λ by α³
        // and leaves the argmin unchanged.
        let mut rng = seeded_rng(9);
        let seqs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..24).map(|_| rng.gen_range(0.5..2.0)).collect())
            .collect();
        let single_tap_lambda = |e: &[f64], alpha: f64| -> f64 {
            let scaled: Vec<f64> = e.iter().map(|&v| alpha * v).collect();
            let m = mean(&scaled);
            scaled.iter().map(|&v| v * (v - m) * (v - m)).sum()
        };
        let base: Vec<f64> = seqs.iter().map(|e| single_tap_lambda(e, 1.0)).collect();
        let scaled: Vec<f64> = seqs.iter().map(|e| single_tap_lambda(e, 1.7)).collect();
        for (b, s) in base.iter().zip(&scaled) {
            assert!((s / b - 1.7f64.powi(3)).abs() < 1e-9);
        }
        assert_eq!(select_argmin(&base), select_argmin(&scaled));
    }

    #[test]
    fn selected_frame_recovers_info_bits() {
        let shaper = test_shaper(24);
        let constellation = ShapedConstellation::new(3).unwrap();
        let bank = test_bank(&[0]);
        let v = 2u32;
        let k = shaper.capacity_bits();
        for (d, pol) in [
            (MappingDim::D1, PolMode::Dual),
            (MappingDim::D2, PolMode::Dual),
            (MappingDim::D4, PolMode::Dual),
            (MappingDim::D1, PolMode::Single),
        ] {
            let config = SelectionConfig {
                flipping_bits: v,
                dim: d,
                metric: SelectionMetric::Lsas(LsasConfig { channels: vec![0], pols: PolSet::Both }),
                joint: false,
            };
            let selector = FrameSelector {
                shaper: &shaper,
                constellation: &constellation,
                pol_mode: pol,
                config: &config,
                bank: Some(&bank),
            };
            let n = selector.shapers_per_frame().unwrap();
            let info: Vec<Vec<bool>> =
                (0..n).map(|i| random_bits(k - v as usize, 100 + i as u64)).collect();
            let (frame, logs) =
                selector.select_frame(&info, &NeighborContext::empty(), 0, 0).unwrap();
            assert_eq!(logs.len(), n, "one decision per shaper slot");
            for log in &logs {
                assert_eq!(log.scores.len(), 4);
            }
            let blocks = crate::mapping::unmap_blocks(&frame, d).unwrap();
            for (i, block) in blocks.iter().enumerate() {
                let bits = crate::dm::AmplitudeShaper::decode(&shaper, block).unwrap();
                assert_eq!(&bits[v as usize..], &info[i][..]);
            }
        }
    }

    #[test]
    fn joint_selection_never_worse_than_independent() {
        let shaper = test_shaper(16);
        let constellation = ShapedConstellation::new(3).unwrap();
        let bank = test_bank(&[0]);
        let lsas_cfg = LsasConfig { channels: vec![0], pols: PolSet::Both };
        let k = shaper.capacity_bits();
        let info: Vec<Vec<bool>> = (0..2).map(|i| random_bits(k - 2, 300 + i as u64)).collect();
        let score_of = |frame: &AmplitudeFrame| {
            lsas(frame, &constellation, &bank, &lsas_cfg, &NeighborContext::empty()).unwrap()
        };
        let mut results = Vec::new();
        for joint in [false, true] {
            let config = SelectionConfig {
                flipping_bits: 2,
                dim: MappingDim::D2,
                metric: SelectionMetric::Lsas(lsas_cfg.clone()),
                joint,
            };
            let selector = FrameSelector {
                shaper: &shaper,
                constellation: &constellation,
                pol_mode: PolMode::Dual,
                config: &config,
                bank: Some(&bank),
            };
            let (frame, logs) = selector.select_frame(&info, &NeighborContext::empty(), 0, 0).unwrap();
            if joint {
                assert_eq!(logs.len(), 1);
                assert_eq!(logs[0].scores.len(), 16, "2^(2·2) joint candidates");
            }
            results.push(score_of(&frame));
        }
        assert!(results[1] <= results[0] + 1e-12 * results[0].abs());
    }

    #[test]
    fn greedy_wdm_reduces_to_select_for_one_channel() {
        let shaper = test_shaper(16);
        let constellation = ShapedConstellation::new(3).unwrap();
        let bank = test_bank(&[-1, 0, 1]);
        let config = SelectionConfig {
            flipping_bits: 2,
            dim: MappingDim::D4,
            metric: SelectionMetric::Lsas(LsasConfig::default()),
            joint: false,
        };
        let selector = FrameSelector {
            shaper: &shaper,
            constellation: &constellation,
            pol_mode: PolMode::Dual,
            config: &config,
            bank: Some(&bank),
        };
        let k = shaper.capacity_bits();
        let bits = vec![random_bits(k - 2, 9)];
        let mut per_channel = BTreeMap::new();
        per_channel.insert(0i32, bits.clone());
        let (chosen, logs) = greedy_wdm_select(&selector, &per_channel, 0).unwrap();
        let (direct, _) = selector.select_frame(&bits, &NeighborContext::empty(), 0, 0).unwrap();
        assert_eq!(chosen[&0], direct);
        assert_eq!(logs.len(), 1);
    }

    #[test]
    fn greedy_wdm_metric_evaluation_count_and_order() {
        assert_eq!(channel_processing_order(&[-1, 0, 1]), vec![-1, 1, 0]);

        let shaper = test_shaper(16);
        let constellation = ShapedConstellation::new(3).unwrap();
        let bank = test_bank(&[-1, 0, 1]);
        let config = SelectionConfig {
            flipping_bits: 2,
            dim: MappingDim::D4,
            metric: SelectionMetric::Lsas(LsasConfig::default()),
            joint: false,
        };
        let selector = FrameSelector {
            shaper: &shaper,
            constellation: &constellation,
            pol_mode: PolMode::Dual,
            config: &config,
            bank: Some(&bank),
        };
        let k = shaper.capacity_bits();
        let mut per_channel = BTreeMap::new();
        for c in -1..=1i32 {
            per_channel.insert(c, vec![random_bits(k - 2, (c + 5) as u64)]);
        }
        let (chosen, logs) = greedy_wdm_select(&selector, &per_channel, 0).unwrap();
        assert_eq!(chosen.len(), 3);
        // Σ_c 2^{(4/d)·v} with d = 4, v = 2: 4 evaluations per channel.
        let total_evals: usize = logs.iter().map(|l| l.scores.len()).sum();
        assert_eq!(total_evals, 3 * 4);
    }

    #[test]
    fn selection_log_writes_json_lines() {
        let entries = vec![SelectionLogEntry {
            channel_offset: 0,
            frame_index: 3,
            slot: 1,
            scores: vec![1.0, 0.5],
            chosen_pattern: 1,
        }];
        let mut buf = Vec::new();
        write_selection_log(&entries, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        let parsed: SelectionLogEntry = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(parsed.chosen_pattern, 1);
    }
}
