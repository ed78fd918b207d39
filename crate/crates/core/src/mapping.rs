//! Mapping shaped amplitude blocks onto the components of dual-polarization
//! QAM frames.
//!
//! A 4D symbol has components (I_x, Q_x, I_y, Q_y). A mapping of dimension
//! `d` gives each shaping block ownership of `d` consecutive components;
//! within a block, amplitude `n` feeds component `n mod d` of the owned set
//! at 4D-symbol time `floor(n/d)` (round-robin). Signs are attached after
//! mapping, consumed in frame-time order, component-major per time slot.

use crate::constellation::ShapedConstellation;
use crate::dm::AmplitudeBlock;
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Mapping dimension: how many 4D-symbol components one block feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MappingDim {
    D1,
    D2,
    D4,
}

impl MappingDim {
    pub fn from_usize(d: usize) -> Result<Self> {
        match d {
            1 => Ok(Self::D1),
            2 => Ok(Self::D2),
            4 => Ok(Self::D4),
            _ => Err(Error::Domain(format!("mapping dimension must be 1, 2 or 4, got {d}"))),
        }
    }

    pub fn as_usize(self) -> usize {
        match self {
            Self::D1 => 1,
            Self::D2 => 2,
            Self::D4 => 4,
        }
    }
}

/// Which polarizations carry signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolMode {
    /// Only the x polarization carries QAM; y stays dark.
    Single,
    /// Both polarizations carry QAM.
    Dual,
}

impl PolMode {
    /// Number of real signal components per 4D symbol.
    pub fn components(self) -> usize {
        match self {
            Self::Single => 2,
            Self::Dual => 4,
        }
    }
}

/// Amplitude-domain frame: per-component raw amplitude sequences, before
/// signs are attached. Component order is (I_x, Q_x[, I_y, Q_y]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmplitudeFrame {
    comps: Vec<Vec<u32>>,
    pol: PolMode,
}

impl AmplitudeFrame {
    pub fn pol(&self) -> PolMode {
        self.pol
    }

    /// Frame length in 4D-symbol slots.
    pub fn len(&self) -> usize {
        self.comps[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn component(&self, idx: usize) -> &[u32] {
        &self.comps[idx]
    }

    /// Scaled symbol-energy sequence of polarization x: `(I² + Q²)·scale²`.
    pub fn energy_x(&self, scale: f64) -> Vec<f64> {
        self.energy_of(0, scale)
    }

    /// Scaled symbol-energy sequence of polarization y (zero when dark).
    pub fn energy_y(&self, scale: f64) -> Vec<f64> {
        if self.pol == PolMode::Single {
            vec![0.0; self.len()]
        } else {
            self.energy_of(2, scale)
        }
    }

    fn energy_of(&self, first_comp: usize, scale: f64) -> Vec<f64> {
        let i = &self.comps[first_comp];
        let q = &self.comps[first_comp + 1];
        i.iter()
            .zip(q)
            .map(|(&a, &b)| ((a as f64).powi(2) + (b as f64).powi(2)) * scale * scale)
            .collect()
    }

    /// Concatenates another frame in time (same shape required).
    pub fn append(&mut self, other: &AmplitudeFrame) {
        assert_eq!(self.pol, other.pol);
        for (dst, src) in self.comps.iter_mut().zip(&other.comps) {
            dst.extend_from_slice(src);
        }
    }
}

/// Number of shaping blocks feeding one frame for this (pol, d) pair.
pub fn blocks_per_frame(pol: PolMode, d: MappingDim) -> Result<usize> {
    let comps = pol.components();
    let d = d.as_usize();
    if d > comps {
        return Err(Error::Domain(format!(
            "mapping dimension {d} exceeds the {comps} available components"
        )));
    }
    Ok(comps / d)
}

/// Maps `comps/d` equal-length blocks onto an amplitude frame. The mapping is
/// exactly invertible; see [`unmap_blocks`].
pub fn map_blocks(blocks: &[AmplitudeBlock], d: MappingDim, pol: PolMode) -> Result<AmplitudeFrame> {
    let needed = blocks_per_frame(pol, d)?;
    if blocks.len() != needed {
        return Err(Error::LengthMismatch {
            expected: needed,
            got: blocks.len(),
            context: "blocks per frame",
        });
    }
    let d = d.as_usize();
    let block_len = blocks[0].len();
    if blocks.iter().any(|b| b.len() != block_len) {
        return Err(Error::Codec("all blocks must have equal length".into()));
    }
    if block_len % d != 0 {
        return Err(Error::Domain(format!(
            "mapping dimension {d} does not divide blocklength {block_len}"
        )));
    }
    let frame_len = block_len / d;
    let mut comps = vec![vec![0u32; frame_len]; pol.components()];
    for (b, block) in blocks.iter().enumerate() {
        for (n, &a) in block.amplitudes.iter().enumerate() {
            let comp = b * d + (n % d);
            let t = n / d;
            comps[comp][t] = a;
        }
    }
    Ok(AmplitudeFrame { comps, pol })
}

/// Inverse of [`map_blocks`].
pub fn unmap_blocks(frame: &AmplitudeFrame, d: MappingDim) -> Result<Vec<AmplitudeBlock>> {
    let n_blocks = blocks_per_frame(frame.pol, d)?;
    let d = d.as_usize();
    let block_len = frame.len() * d;
    let mut blocks = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let mut amps = Vec::with_capacity(block_len);
        for n in 0..block_len {
            amps.push(frame.comps[b * d + (n % d)][n / d]);
        }
        blocks.push(AmplitudeBlock::new(amps));
    }
    Ok(blocks)
}

/// Complex dual-polarization symbol frame for one WDM subchannel.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPolFrame {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    pol: PolMode,
}

impl DualPolFrame {
    pub fn new(x: Vec<Complex64>, y: Vec<Complex64>, pol: PolMode) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                expected: x.len(),
                got: y.len(),
                context: "frame polarizations",
            });
        }
        if x.iter().chain(&y).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Domain("frame contains non-finite values".into()));
        }
        Ok(Self { x, y, pol })
    }

    pub fn pol(&self) -> PolMode {
        self.pol
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Symbol-energy sequences `E_p(n) = |s_p(n)|²` for both polarizations.
    pub fn energy_sequences(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.x.iter().map(|s| s.norm_sqr()).collect(),
            self.y.iter().map(|s| s.norm_sqr()).collect(),
        )
    }

    pub fn append(&mut self, other: &DualPolFrame) {
        assert_eq!(self.pol, other.pol);
        self.x.extend_from_slice(&other.x);
        self.y.extend_from_slice(&other.y);
    }
}

/// Attaches sign bits to an amplitude frame, producing the complex symbol
/// frame. Signs are consumed component-major per time slot; `true` flips the
/// sign. Requires `signs.len() == frame.len() * pol.components()`.
pub fn attach_signs(
    frame: &AmplitudeFrame,
    signs: &[bool],
    constellation: &ShapedConstellation,
) -> Result<DualPolFrame> {
    let n_comps = frame.pol.components();
    let expected = frame.len() * n_comps;
    if signs.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            got: signs.len(),
            context: "sign bits per frame",
        });
    }
    let scale = constellation.scale();
    let signed = |comp: usize, t: usize| -> f64 {
        let a = frame.comps[comp][t] as f64 * scale;
        if signs[t * n_comps + comp] {
            -a
        } else {
            a
        }
    };
    let len = frame.len();
    let x: Vec<Complex64> = (0..len)
        .map(|t| Complex64::new(signed(0, t), signed(1, t)))
        .collect();
    let y: Vec<Complex64> = match frame.pol {
        PolMode::Single => vec![Complex64::new(0.0, 0.0); len],
        PolMode::Dual => (0..len)
            .map(|t| Complex64::new(signed(2, t), signed(3, t)))
            .collect(),
    };
    DualPolFrame::new(x, y, frame.pol)
}

/// Recovers amplitude blocks and sign bits from a signed frame.
pub fn unmap_signed(
    frame: &DualPolFrame,
    d: MappingDim,
    constellation: &ShapedConstellation,
) -> Result<(Vec<AmplitudeBlock>, Vec<bool>)> {
    let n_comps = frame.pol.components();
    let len = frame.len();
    let mut comps = vec![vec![0u32; len]; n_comps];
    let mut signs = vec![false; len * n_comps];
    let alphabet = constellation.amplitudes();
    for t in 0..len {
        let values: [f64; 4] = [frame.x[t].re, frame.x[t].im, frame.y[t].re, frame.y[t].im];
        for comp in 0..n_comps {
            let v = values[comp];
            let idx = constellation.amplitude_index_of(v)?;
            comps[comp][t] = alphabet[idx];
            signs[t * n_comps + comp] = v < 0.0;
        }
    }
    let amp_frame = AmplitudeFrame { comps, pol: frame.pol };
    Ok((unmap_blocks(&amp_frame, d)?, signs))
}

/// Writes a frame as CSV with columns `time,ix,qx,iy,qy`.
pub fn write_frame_csv<W: std::io::Write>(frame: &DualPolFrame, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["time", "ix", "qx", "iy", "qy"])
        .map_err(|e| Error::Serde(e.to_string()))?;
    for t in 0..frame.len() {
        w.write_record(&[
            t.to_string(),
            frame.x[t].re.to_string(),
            frame.x[t].im.to_string(),
            frame.y[t].re.to_string(),
            frame.y[t].im.to_string(),
        ])
        .map_err(|e| Error::Serde(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
