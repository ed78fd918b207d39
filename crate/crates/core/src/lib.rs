//! Probabilistic amplitude shaping (PAS) with sequence selection for the
//! optical fiber channel.
//!
//! The crate bundles everything needed to study how finite-length amplitude
//! shaping interacts with fiber nonlinear interference (NLI):
//!
//! * [`constellation`] — PAM/QAM alphabets, Maxwell-Boltzmann amplitude
//!   distributions and PAS rate accounting.
//! * [`dm`] — fixed-length invertible amplitude shapers: CCDM, enumerative
//!   sphere shaping (ESS), its fourth-moment-limited variant (K-ESS), and an
//!   ideal i.i.d. sampler.
//! * [`mapping`] — 1D/2D/4D mapping of shaped blocks onto the four components
//!   of dual-polarization QAM frames.
//! * [`nli`] — a linear lowpass filter model that maps symbol-energy
//!   sequences to nonlinear distortion, plus spectral analysis tools.
//! * [`selection`] — candidate generation via flipping bits and the LSAS/EDI
//!   selection metrics.
//! * [`fiber`] — dual-polarization split-step Fourier simulation of WDM
//!   transmission with EDFA noise, and the matching receiver DSP.
//! * [`metrics`] — effective SNR, Q-factor from uncoded BER, and achievable
//!   information rate.
//! * [`experiment`] — experiment configuration, sweep orchestration and
//!   figure-data emission used by the CLI.

pub mod constellation;
pub mod dm;
pub mod error;
pub mod experiment;
pub mod fiber;
pub mod mapping;
pub mod metrics;
pub mod nli;
pub mod selection;
pub mod util;

pub use error::{Error, Result};
