//! Dual-polarization WDM waveform simulation and receiver DSP.

pub mod config;
pub mod ssfm;
pub mod txrx;
pub mod waveform;

pub use config::{link_setup1, link_setup2, LinkSystemConfig, PolarizationModel, SsfmControl};
pub use ssfm::propagate;
pub use txrx::TxRxEngine;
pub use waveform::{Waveform, WaveformSidecar};
