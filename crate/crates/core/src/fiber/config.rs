//! Link and system configuration shared by the simulator and the NLI model.

use crate::error::{Error, Result};
use crate::util::{from_db, SPEED_OF_LIGHT};
use serde::{Deserialize, Serialize};

/// How the nonlinear step treats polarization coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarizationModel {
    /// Manakov equation: phase from `(8/9)·γ·(|A_x|² + |A_y|²)`. Used for
    /// standard fibers with random birefringence; a dark y polarization
    /// reduces to `(8/9)·γ·|A_x|²`.
    Manakov,
    /// Scalar NLSE with `γ·|A|²` per polarization, no coupling.
    Scalar,
}

impl PolarizationModel {
    /// Factor multiplying γ in the nonlinear phase.
    pub fn gamma_factor(self) -> f64 {
        match self {
            Self::Manakov => 8.0 / 9.0,
            Self::Scalar => 1.0,
        }
    }
}

/// Split-step control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsfmControl {
    /// Maximum nonlinear phase per step (radians); sets the step size
    /// together with the instantaneous peak power and local attenuation.
    pub max_nonlinear_phase_rad: f64,
    /// Hard cap on the step length in km.
    pub max_step_km: f64,
    /// Optional fixed number of logarithmically spaced steps per span
    /// (equal nonlinear effective length per step). Overrides the
    /// phase-driven policy when set.
    pub log_steps_per_span: Option<usize>,
    pub polarization_model: PolarizationModel,
}

impl Default for SsfmControl {
    fn default() -> Self {
        Self {
            max_nonlinear_phase_rad: 1e-3,
            max_step_km: 1.0,
            log_steps_per_span: None,
            polarization_model: PolarizationModel::Manakov,
        }
    }
}

/// Fiber spans, amplifier, WDM grid and launch configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSystemConfig {
    pub span_length_km: f64,
    pub n_spans: usize,
    pub attenuation_db_per_km: f64,
    pub dispersion_ps_nm_km: f64,
    pub gamma_per_w_km: f64,
    pub noise_figure_db: f64,
    pub center_wavelength_nm: f64,
    pub baud_rate_hz: f64,
    pub wdm_spacing_hz: f64,
    pub n_channels: usize,
    pub rolloff: f64,
    /// Per-channel receiver-side oversampling (the "oversampling factor" of
    /// the system tables). The simulation rate is raised independently to
    /// cover the WDM grid; see [`LinkSystemConfig::sim_oversampling`].
    pub dsp_oversampling: usize,
    pub launch_power_dbm_per_pol: f64,
    #[serde(default)]
    pub ssfm: SsfmControl,
}

impl LinkSystemConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("span_length_km", self.span_length_km),
            ("center_wavelength_nm", self.center_wavelength_nm),
            ("baud_rate_hz", self.baud_rate_hz),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        // zero is allowed for linear-limit and lossless studies
        for (name, v) in [
            ("attenuation_db_per_km", self.attenuation_db_per_km),
            ("gamma_per_w_km", self.gamma_per_w_km),
        ] {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if self.dispersion_ps_nm_km < 0.0 {
            return Err(Error::Config("dispersion must be >= 0".into()));
        }
        if self.n_spans == 0 {
            return Err(Error::Config("n_spans must be >= 1".into()));
        }
        if self.n_channels == 0 || self.n_channels % 2 == 0 {
            return Err(Error::Config(format!(
                "n_channels must be odd so a center channel exists, got {}",
                self.n_channels
            )));
        }
        if self.n_channels > 1 && self.wdm_spacing_hz < self.baud_rate_hz * (1.0 + self.rolloff) {
            return Err(Error::Config("WDM spacing narrower than the channel bandwidth".into()));
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(Error::Config("rolloff must be in [0, 1]".into()));
        }
        if self.dsp_oversampling < 2 {
            return Err(Error::Config("dsp_oversampling must be >= 2".into()));
        }
        if !(self.ssfm.max_nonlinear_phase_rad > 0.0) || !(self.ssfm.max_step_km > 0.0) {
            return Err(Error::Config("ssfm step controls must be positive".into()));
        }
        Ok(())
    }

    pub fn span_length_m(&self) -> f64 {
        self.span_length_km * 1e3
    }

    pub fn total_length_m(&self) -> f64 {
        self.span_length_m() * self.n_spans as f64
    }

    /// Power attenuation coefficient in nepers per meter.
    pub fn alpha_np_per_m(&self) -> f64 {
        self.attenuation_db_per_km * (10f64.ln() / 10.0) / 1e3
    }

    /// Group velocity dispersion β₂ in s²/m (negative for anomalous
    /// dispersion, D > 0).
    pub fn beta2_s2_per_m(&self) -> f64 {
        let lambda = self.center_wavelength_nm * 1e-9;
        let d_si = self.dispersion_ps_nm_km * 1e-6; // s/m²
        -d_si * lambda * lambda / (2.0 * std::f64::consts::PI * SPEED_OF_LIGHT)
    }

    pub fn gamma_per_w_m(&self) -> f64 {
        self.gamma_per_w_km / 1e3
    }

    pub fn symbol_period_s(&self) -> f64 {
        1.0 / self.baud_rate_hz
    }

    pub fn center_frequency_hz(&self) -> f64 {
        SPEED_OF_LIGHT / (self.center_wavelength_nm * 1e-9)
    }

    /// Channel indices relative to the center channel, e.g. `-5..=5`.
    pub fn channel_offsets(&self) -> Vec<i32> {
        let half = (self.n_channels as i32 - 1) / 2;
        (-half..=half).collect()
    }

    /// Center-frequency offset of channel `c` relative to the grid center.
    pub fn channel_offset_hz(&self, c: i32) -> f64 {
        c as f64 * self.wdm_spacing_hz
    }

    /// Total occupied optical bandwidth of the WDM grid.
    pub fn occupied_bandwidth_hz(&self) -> f64 {
        (self.n_channels as f64 - 1.0) * self.wdm_spacing_hz
            + self.baud_rate_hz * (1.0 + self.rolloff)
    }

    /// Simulation oversampling: at least the DSP factor, raised so the
    /// sample rate covers twice the occupied bandwidth (nonlinear mixing
    /// products around the grid edges stay unaliased).
    pub fn sim_oversampling(&self) -> usize {
        let needed = 2.0 * self.occupied_bandwidth_hz() / self.baud_rate_hz;
        (needed.ceil() as usize).max(self.dsp_oversampling).max(4)
    }

    pub fn sim_sample_rate_hz(&self) -> f64 {
        self.sim_oversampling() as f64 * self.baud_rate_hz
    }

    /// Lumped amplifier gain exactly compensating one span, linear power.
    pub fn span_gain_linear(&self) -> f64 {
        from_db(self.attenuation_db_per_km * self.span_length_km)
    }

    /// One-amplifier ASE power spectral density per polarization (W/Hz):
    /// `n_sp · hν · (G - 1)` with `NF = 2 n_sp (G-1)/G`.
    pub fn ase_psd_per_pol(&self) -> f64 {
        let g = self.span_gain_linear();
        if g <= 1.0 {
            return 0.0;
        }
        let nf = from_db(self.noise_figure_db);
        let n_sp = nf * g / (2.0 * (g - 1.0));
        n_sp * crate::util::PLANCK * self.center_frequency_hz() * (g - 1.0)
    }

    /// Mean QAM symbol energy (J) per polarization that realizes the
    /// configured launch power with unit-energy pulses.
    pub fn mean_symbol_energy_j(&self) -> f64 {
        crate::util::dbm_to_watts(self.launch_power_dbm_per_pol) * self.symbol_period_s()
    }

    /// Denominator `q` of the reduced fraction `wdm_spacing/baud = p/q`; the
    /// per-channel symbol count must be divisible by `q` so channel shifts
    /// land on DFT bins.
    pub fn required_symbol_divisor(&self) -> Result<usize> {
        if self.n_channels == 1 {
            return Ok(1);
        }
        let ratio = self.wdm_spacing_hz / self.baud_rate_hz;
        for q in 1..=4096usize {
            let p = ratio * q as f64;
            if (p - p.round()).abs() < 1e-9 * q as f64 {
                return Ok(q);
            }
        }
        Err(Error::Config(
            "wdm_spacing/baud_rate is not a small rational; channel shifts cannot land on DFT bins"
                .into(),
        ))
    }
}

/// Parameters of the long-haul multi-span study link (256-QAM, 32 GBd,
/// 20 × 80 km).
pub fn link_setup1() -> LinkSystemConfig {
    LinkSystemConfig {
        span_length_km: 80.0,
        n_spans: 20,
        attenuation_db_per_km: 0.2,
        dispersion_ps_nm_km: 17.0,
        gamma_per_w_km: 1.37,
        noise_figure_db: 6.0,
        center_wavelength_nm: 1550.0,
        baud_rate_hz: 32e9,
        wdm_spacing_hz: 50e9,
        n_channels: 11,
        rolloff: 0.1,
        dsp_oversampling: 2,
        launch_power_dbm_per_pol: -6.5,
        ssfm: SsfmControl::default(),
    }
}

/// Parameters of the single-span short-haul study link (64-QAM, 50 GBd,
/// 1 × 205 km).
pub fn link_setup2() -> LinkSystemConfig {
    LinkSystemConfig {
        span_length_km: 205.0,
        n_spans: 1,
        attenuation_db_per_km: 0.2,
        dispersion_ps_nm_km: 17.0,
        gamma_per_w_km: 1.30,
        noise_figure_db: 5.0,
        center_wavelength_nm: 1550.0,
        baud_rate_hz: 50e9,
        wdm_spacing_hz: 55e9,
        n_channels: 1,
        rolloff: 0.1,
        dsp_oversampling: 2,
        launch_power_dbm_per_pol: 6.0,
        ssfm: SsfmControl::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setup_links_validate() {
        link_setup1().validate().unwrap();
        link_setup2().validate().unwrap();
    }

    #[test]
    fn beta2_for_standard_fiber() {
        // 17 ps/nm/km at 1550 nm is about -21.7 ps²/km.
        let b2 = link_setup1().beta2_s2_per_m() * 1e24; // ps²/m
        assert!((b2 * 1e3 - -21.68).abs() < 0.05, "β₂/km = {}", b2 * 1e3);
    }

    #[test]
    fn full_wdm_grid_forces_higher_simulation_rate() {
        let link = link_setup1();
        assert_eq!(link.dsp_oversampling, 2);
        let fs = link.sim_sample_rate_hz();
        assert!(fs >= 2.0 * link.occupied_bandwidth_hz());
        // single channel keeps a compact rate
        let single = LinkSystemConfig { n_channels: 1, ..link };
        assert_eq!(single.sim_oversampling(), 4);
    }

    #[test]
    fn symbol_divisor_for_both_grids() {
        assert_eq!(link_setup1().required_symbol_divisor().unwrap(), 16); // 50/32 = 25/16
        let mut s2 = link_setup2();
        s2.n_channels = 11;
        assert_eq!(s2.required_symbol_divisor().unwrap(), 10); // 55/50 = 11/10
    }

    #[test]
    fn even_channel_count_rejected() {
        let mut link = link_setup1();
        link.n_channels = 4;
        assert!(link.validate().is_err());
    }

    #[test]
    fn ase_psd_magnitude_is_sensible() {
        // 16 dB gain, NF 6 dB at 1550 nm: PSD around 1e-17 W/Hz per span.
        let psd = link_setup1().ase_psd_per_pol();
        assert!(psd > 5e-18 && psd < 2e-17, "psd = {psd}");
    }
}
