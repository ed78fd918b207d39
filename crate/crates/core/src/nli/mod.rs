//! Linear lowpass channel model for fiber nonlinear interference.
//!
//! First-order perturbation theory, keeping only symbol-energy terms,
//! approximates the received sample as
//! `r(n) ≈ s(n)·(1 + jγ·D(n))` where the distortion `D(n)` is a sum of
//! linear filterings of the symbol-energy sequences of both polarizations
//! and all WDM subchannels. [`kernel`] computes the underlying perturbation
//! coefficients for Gaussian-approximated pulses, [`filter`] assembles them
//! into per-(channel, polarization) tap sets, [`distortion`] applies them,
//! and [`spectrum`] provides the Welch analysis used for the spectral-dip
//! arguments.

pub mod distortion;
pub mod filter;
pub mod kernel;
pub mod spectrum;

pub use distortion::{
    aggregate_energy, predict_distortion, predict_received, rds_series, simplified_distortion,
    ChannelEnergies, DistortionField, Edge, ReceivedForm,
};
pub use filter::{
    build_filter_bank, filter_bandwidth_3db, Bandwidth3Db, FilterTaps, NliFilterBank, PolPair,
};
pub use kernel::{compute_kernel, KernelOptions, PerturbationKernel};
pub use spectrum::{energy_spectrum, mean_db_in_band, Spectrum, WelchConfig, Window};

/// Polarization label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Pol {
    X,
    Y,
}

impl Pol {
    pub fn other(self) -> Pol {
        match self {
            Pol::X => Pol::Y,
            Pol::Y => Pol::X,
        }
    }
}
