//! Applying the energy-model filters: distortion prediction, the running
//! digital sum, and the aggregate energy sequence.

use super::filter::{NliFilterBank, PolPair};
use super::Pol;
use crate::error::{Error, Result};
use crate::mapping::DualPolFrame;
use crate::util::mean;
use num_complex::Complex64;
use rustfft::FftPlanner;

/// How sequences are extended beyond their ends during filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    /// The mean-removed sequence is zero outside its support (neighbors at
    /// their mean energy). Natural for per-frame metrics.
    MeanPadded,
    /// Indices wrap around. Matches the circular split-step simulation.
    Circular,
}

/// Symbol-energy sequences of one WDM subchannel at grid offset
/// `offset = c' - c` relative to the channel of interest.
#[derive(Debug, Clone)]
pub struct ChannelEnergies {
    pub offset: i32,
    pub e_x: Vec<f64>,
    pub e_y: Vec<f64>,
}

impl ChannelEnergies {
    pub fn energy(&self, pol: Pol) -> &[f64] {
        match pol {
            Pol::X => &self.e_x,
            Pol::Y => &self.e_y,
        }
    }
}

/// Distortion decomposition: `total = Σ variations + mean`.
#[derive(Debug, Clone)]
pub struct DistortionField {
    pub total: Vec<f64>,
    /// Deterministic mean term (mean energies times DC filter responses).
    pub mean: f64,
    /// Mean-removed filtered contributions, keyed by (channel offset,
    /// interfering polarization).
    pub variations: Vec<((i32, Pol), Vec<f64>)>,
}

/// Applies taps to an already mean-removed sequence:
/// `out(n) = Σ_m x(n+m)·h(m)`.
pub(crate) fn apply_taps(
    x: &[f64],
    taps: &super::filter::FilterTaps,
    edge: Edge,
) -> Vec<f64> {
    // Frequency-domain path once the direct sum gets expensive.
    if x.len() * taps.taps.len() > (1 << 21) {
        apply_taps_fft(x, taps, edge)
    } else {
        apply_taps_direct(x, taps, edge)
    }
}

pub(crate) fn apply_taps_direct(
    x: &[f64],
    taps: &super::filter::FilterTaps,
    edge: Edge,
) -> Vec<f64> {
    let n = x.len() as i64;
    let mut out = vec![0.0; x.len()];
    for (o, out_n) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (i, &h) in taps.taps.iter().enumerate() {
            let idx = o as i64 + taps.m_min + i as i64;
            let xv = match edge {
                Edge::MeanPadded => {
                    if idx < 0 || idx >= n {
                        0.0
                    } else {
                        x[idx as usize]
                    }
                }
                Edge::Circular => x[idx.rem_euclid(n) as usize],
            };
            acc += xv * h;
        }
        *out_n = acc;
    }
    out
}

pub(crate) fn apply_taps_fft(
    x: &[f64],
    taps: &super::filter::FilterTaps,
    edge: Edge,
) -> Vec<f64> {
    let n = x.len();
    let span = taps.taps.len();
    let len = match edge {
        Edge::Circular => n,
        // Enough zero padding that wrap-around never touches real data.
        Edge::MeanPadded => (n + span).next_power_of_two(),
    };
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(len);
    let ifft = planner.plan_fft_inverse(len);

    let mut xv: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    xv.resize(len, Complex64::new(0.0, 0.0));
    // Kernel with taps placed at +m (mod len): out = IFFT(X·conj(H)) with
    // H_k = Σ h(m) e^{-j2πkm/len} gives Σ_m x(n+m)h(m).
    let mut hv = vec![Complex64::new(0.0, 0.0); len];
    for (i, &h) in taps.taps.iter().enumerate() {
        let m = taps.m_min + i as i64;
        let idx = m.rem_euclid(len as i64) as usize;
        hv[idx] += Complex64::new(h, 0.0);
    }
    fft.process(&mut xv);
    fft.process(&mut hv);
    for (a, b) in xv.iter_mut().zip(&hv) {
        *a *= b.conj();
    }
    ifft.process(&mut xv);
    let scale = 1.0 / len as f64;
    xv[..n].iter().map(|c| c.re * scale).collect()
}

/// Predicts the distortion of polarization `pol` of the channel of interest
/// from the energy sequences of the subchannel subset in `energies`: each
/// (c', p') pair contributes its mean-removed energy filtered by the
/// matching taps, plus a deterministic mean term.
pub fn predict_distortion(
    energies: &[ChannelEnergies],
    bank: &NliFilterBank,
    pol: Pol,
    edge: Edge,
) -> Result<DistortionField> {
    if energies.is_empty() {
        return Err(Error::Domain("no channel energies supplied".into()));
    }
    let n = energies[0].e_x.len();
    for ch in energies {
        if ch.e_x.len() != n || ch.e_y.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: ch.e_x.len().min(ch.e_y.len()),
                context: "channel energy sequences",
            });
        }
    }
    let mut total = vec![0.0; n];
    let mut mean_term = 0.0;
    let mut variations = Vec::new();
    for ch in energies {
        for p_prime in [Pol::X, Pol::Y] {
            let pair = if p_prime == pol { PolPair::Intra } else { PolPair::Inter };
            let taps = bank.taps(ch.offset, pair).ok_or_else(|| {
                Error::MissingData(format!(
                    "no taps for channel offset {} ({pair:?})",
                    ch.offset
                ))
            })?;
            let e = ch.energy(p_prime);
            let e_bar = mean(e);
            let de: Vec<f64> = e.iter().map(|&v| v - e_bar).collect();
            let dd = apply_taps(&de, taps, edge);
            for (t, d) in total.iter_mut().zip(&dd) {
                *t += d;
            }
            mean_term += e_bar * taps.dc();
            variations.push(((ch.offset, p_prime), dd));
        }
    }
    for t in total.iter_mut() {
        *t += mean_term;
    }
    Ok(DistortionField { total, mean: mean_term, variations })
}

/// Which received-sample approximation to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceivedForm {
    /// `r = s·(1 + jγD)`.
    Linear,
    /// `r = s·exp(jγD)` (distortion as pure phase noise).
    Phase,
}

/// Applies predicted distortion to a frame. `d_x`/`d_y` are the total
/// distortion sequences for the two polarizations.
pub fn predict_received(
    frame: &DualPolFrame,
    d_x: &[f64],
    d_y: &[f64],
    gamma_per_w_m: f64,
    form: ReceivedForm,
) -> Result<DualPolFrame> {
    if d_x.len() != frame.len() || d_y.len() != frame.len() {
        return Err(Error::LengthMismatch {
            expected: frame.len(),
            got: d_x.len().min(d_y.len()),
            context: "distortion vs frame",
        });
    }
    let apply = |s: &Complex64, d: f64| -> Complex64 {
        let phi = gamma_per_w_m * d;
        match form {
            ReceivedForm::Linear => s * Complex64::new(1.0, phi),
            ReceivedForm::Phase => s * Complex64::new(0.0, phi).exp(),
        }
    };
    let x = frame.x.iter().zip(d_x).map(|(s, &d)| apply(s, d)).collect();
    let y = frame.y.iter().zip(d_y).map(|(s, &d)| apply(s, d)).collect();
    DualPolFrame::new(x, y, frame.pol())
}

/// Simplified prediction that collapses intra/inter polarization filters to
/// the inter-polarization one: `D_p ≈ Σ_c' (2E_p + E_q) ∗ h_inter`. Exact
/// except for the SPM lag-zero tap.
pub fn simplified_distortion(
    energies: &[ChannelEnergies],
    bank: &NliFilterBank,
    pol: Pol,
    edge: Edge,
) -> Result<DistortionField> {
    if energies.is_empty() {
        return Err(Error::Domain("no channel energies supplied".into()));
    }
    let n = energies[0].e_x.len();
    let mut total = vec![0.0; n];
    let mut mean_term = 0.0;
    let mut variations = Vec::new();
    for ch in energies {
        let taps = bank.taps(ch.offset, PolPair::Inter).ok_or_else(|| {
            Error::MissingData(format!("no taps for channel offset {}", ch.offset))
        })?;
        let e_p = ch.energy(pol);
        let e_q = ch.energy(pol.other());
        let own_bar = mean(e_p);
        let other_bar = mean(e_q);
        let own: Vec<f64> = e_p.iter().map(|&v| 2.0 * (v - own_bar)).collect();
        let other: Vec<f64> = e_q.iter().map(|&v| v - other_bar).collect();
        let dd_own = apply_taps(&own, taps, edge);
        let dd_other = apply_taps(&other, taps, edge);
        for (t, (a, b)) in total.iter_mut().zip(dd_own.iter().zip(&dd_other)) {
            *t += a + b;
        }
        mean_term += (2.0 * own_bar + other_bar) * taps.dc();
        variations.push(((ch.offset, pol), dd_own));
        variations.push(((ch.offset, pol.other()), dd_other));
    }
    for t in total.iter_mut() {
        *t += mean_term;
    }
    Ok(DistortionField { total, mean: mean_term, variations })
}

/// Running digital sums over the subchannel set: the polarization-summed
/// variant and the refined per-polarization variant for `pol`, both as full
/// prefix series (index t-1 holds the sum over the first t symbols).
pub fn rds_series(energies: &[ChannelEnergies], pol: Pol) -> Result<(Vec<f64>, Vec<f64>)> {
    if energies.is_empty() {
        return Err(Error::Domain("no channel energies supplied".into()));
    }
    let n = energies[0].e_x.len();
    let mut both = vec![0.0; n];
    let mut own = vec![0.0; n];
    for ch in energies {
        for (seq, acc) in [(&ch.e_x, Pol::X), (&ch.e_y, Pol::Y)] {
            let e_bar = mean(seq);
            for (slot, &v) in both.iter_mut().zip(seq.iter()) {
                *slot += v - e_bar;
            }
            if acc == pol {
                for (slot, &v) in own.iter_mut().zip(seq.iter()) {
                    *slot += v - e_bar;
                }
            }
        }
    }
    let mut tilde = Vec::with_capacity(n);
    let mut refined = Vec::with_capacity(n);
    let mut acc_t = 0.0;
    let mut acc_o = 0.0;
    for i in 0..n {
        acc_t += both[i];
        acc_o += own[i];
        tilde.push(acc_t);
        refined.push(acc_t + acc_o);
    }
    Ok((tilde, refined))
}

/// Aggregate symbol-energy sequence `2(E_p - Ē_p) + (E_q - Ē_q)` for one
/// subchannel; zero mean by construction.
pub fn aggregate_energy(e_p: &[f64], e_q: &[f64], _pol: Pol) -> Result<Vec<f64>> {
    if e_p.len() != e_q.len() {
        return Err(Error::LengthMismatch {
            expected: e_p.len(),
            got: e_q.len(),
            context: "aggregate energy polarizations",
        });
    }
    let p_bar = mean(e_p);
    let q_bar = mean(e_q);
    Ok(e_p
        .iter()
        .zip(e_q)
        .map(|(&a, &b)| 2.0 * (a - p_bar) + (b - q_bar))
        .collect())
}
