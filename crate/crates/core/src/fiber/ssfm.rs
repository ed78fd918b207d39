//! Symmetric split-step Fourier propagation of the Manakov (or scalar NLSE)
//! equation over multi-span links with lumped amplification and ASE noise.

use super::config::{LinkSystemConfig, PolarizationModel};
use super::waveform::Waveform;
use crate::error::{Error, Result};
use crate::util::{seeded_rng, stream_seed};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

/// Propagates the waveform through the configured link. Deterministic given
/// `seed`: different seeds change only the ASE realization.
pub fn propagate(wave: &Waveform, link: &LinkSystemConfig, seed: u64) -> Result<Waveform> {
    link.validate()?;
    let n = wave.len();
    if n == 0 {
        return Err(Error::Domain("empty waveform".into()));
    }
    let fs = wave.sample_rate_hz;
    let beta2 = link.beta2_s2_per_m();
    let alpha = link.alpha_np_per_m();
    let gamma_eff = link.gamma_per_w_m() * link.ssfm.polarization_model.gamma_factor();
    let span_m = link.span_length_m();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    // Quadratic phase per meter at each bin.
    let disp: Vec<f64> = (0..n)
        .map(|k| {
            let kf = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
            let w = 2.0 * std::f64::consts::PI * kf * fs / n as f64;
            0.5 * beta2 * w * w
        })
        .collect();

    let mut x = wave.x.clone();
    let mut y = wave.y.clone();
    let mut rng = seeded_rng(stream_seed(seed, "ase"));
    let ase_sigma = {
        let psd = link.ase_psd_per_pol();
        (psd * fs / 2.0).sqrt() // per real component
    };
    let gain_field = link.span_gain_linear().sqrt();

    let mut linear = |x: &mut Vec<Complex64>, y: &mut Vec<Complex64>, dz: f64| {
        if dz == 0.0 {
            return;
        }
        let loss = (-0.5 * alpha * dz).exp();
        for pol in [&mut *x, &mut *y] {
            fft.process(pol);
            for (s, &d) in pol.iter_mut().zip(&disp) {
                *s *= Complex64::from_polar(loss, d * dz) / n as f64;
            }
            ifft.process(pol);
        }
    };

    for _span in 0..link.n_spans {
        let steps = plan_steps(&x, &y, link, gamma_eff)?;
        let mut pending = 0.0f64;
        for &dz in &steps {
            linear(&mut x, &mut y, pending + 0.5 * dz);
            // Nonlinear phase from the mid-step field.
            match link.ssfm.polarization_model {
                PolarizationModel::Manakov => {
                    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
                        let phi = gamma_eff * (a.norm_sqr() + b.norm_sqr()) * dz;
                        let rot = Complex64::from_polar(1.0, phi);
                        *a *= rot;
                        *b *= rot;
                    }
                }
                PolarizationModel::Scalar => {
                    for pol in [&mut x, &mut y] {
                        for a in pol.iter_mut() {
                            let phi = gamma_eff * a.norm_sqr() * dz;
                            *a *= Complex64::from_polar(1.0, phi);
                        }
                    }
                }
            }
            pending = 0.5 * dz;
        }
        linear(&mut x, &mut y, pending);
        // EDFA: restore the span loss, then add ASE.
        for pol in [&mut x, &mut y] {
            for s in pol.iter_mut() {
                *s *= gain_field;
            }
            if ase_sigma > 0.0 {
                for s in pol.iter_mut() {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    *s += Complex64::new(re, im) * ase_sigma;
                }
            }
        }
        let _ = span_m;
    }
    Waveform::new(x, y, fs)
}

/// Step lengths for one span under the configured policy.
fn plan_steps(
    x: &[Complex64],
    y: &[Complex64],
    link: &LinkSystemConfig,
    gamma_eff: f64,
) -> Result<Vec<f64>> {
    let span = link.span_length_m();
    let alpha = link.alpha_np_per_m();
    if let Some(n) = link.ssfm.log_steps_per_span {
        if n == 0 {
            return Err(Error::Config("log_steps_per_span must be >= 1".into()));
        }
        // Equal nonlinear effective length per step.
        let total_eff = if alpha > 0.0 {
            (1.0 - (-alpha * span).exp()) / alpha
        } else {
            span
        };
        let mut bounds = vec![0.0];
        for i in 1..=n {
            let eff = total_eff * i as f64 / n as f64;
            let z = if alpha > 0.0 {
                -(1.0 - alpha * eff).max(1e-300).ln() / alpha
            } else {
                eff
            };
            bounds.push(z.min(span));
        }
        *bounds.last_mut().unwrap() = span;
        return Ok(bounds.windows(2).map(|w| w[1] - w[0]).collect());
    }

    let p_max = x
        .iter()
        .zip(y)
        .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
        .fold(0.0, f64::max);
    let max_step = link.ssfm.max_step_km * 1e3;
    let phi_max = link.ssfm.max_nonlinear_phase_rad;
    let mut steps = Vec::new();
    let mut z = 0.0f64;
    while z < span {
        let local_power = p_max * (-alpha * z).exp();
        let dz_phase = if gamma_eff * local_power > 0.0 {
            phi_max / (gamma_eff * local_power)
        } else {
            f64::INFINITY
        };
        let dz = dz_phase.min(max_step).min(span - z);
        if !(dz > 0.0) {
            return Err(Error::Config(format!(
                "step-size collapse at z = {z} m (nonlinear phase per step bound too tight)"
            )));
        }
        steps.push(dz);
        z += dz;
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::config::{link_setup1, link_setup2, SsfmControl};
    use crate::util::seeded_rng;
    use rand::Rng;

    fn random_wave(n: usize, power_w: f64, fs: f64, seed: u64) -> Waveform {
        let mut rng = seeded_rng(seed);
        let amp = (power_w / 2.0).sqrt();
        let mut gen = || -> Vec<Complex64> {
            (0..n)
                .map(|_| {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amp
                })
                .collect()
        };
        Waveform::new(gen(), gen(), fs).unwrap()
    }

    fn noiseless(link: &mut LinkSystemConfig) {
        // NF so low the (G-1) ASE term underflows to a sub-attowatt level
        link.noise_figure_db = -300.0;
    }

    #[test]
    fn linear_limit_inverts_exactly() {
        // γ = 0, no noise: propagation is the CD transfer function times the
        // span loss and gain; applying the inverse CD filter restores the
        // input to near machine precision.
        let mut link = link_setup1();
        link.gamma_per_w_km = 1e-30;
        link.n_spans = 4;
        noiseless(&mut link);
        let n = 4096;
        let fs = 4.0 * link.baud_rate_hz;
        let wave = random_wave(n, 1e-3, fs, 7);
        let out = propagate(&wave, &link, 0).unwrap();

        // invert CD on the output spectrum
        let beta2 = link.beta2_s2_per_m();
        let l = link.total_length_m();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let mut x = out.x.clone();
        fft.process(&mut x);
        for (k, s) in x.iter_mut().enumerate() {
            let kf = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
            let w = 2.0 * std::f64::consts::PI * kf * fs / n as f64;
            *s *= Complex64::from_polar(1.0, -0.5 * beta2 * w * w * l) / n as f64;
        }
        ifft.process(&mut x);
        let num: f64 = x.iter().zip(&wave.x).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = wave.x.iter().map(|s| s.norm_sqr()).sum();
        assert!(
            num / den < 1e-18,
            "CD inversion EVM {} dB",
            10.0 * (num / den).log10()
        );
    }

    #[test]
    fn pure_spm_matches_analytic_phase() {
        // dispersion = 0, loss ~ 0, y dark: Manakov gives exp(j·(8/9)γ|A|²L).
        let mut link = link_setup2();
        link.dispersion_ps_nm_km = 0.0;
        link.attenuation_db_per_km = 1e-12;
        noiseless(&mut link);
        let n = 1024;
        let fs = 4.0 * link.baud_rate_hz;
        let mut wave = random_wave(n, 2e-3, fs, 9);
        wave.y.iter_mut().for_each(|s| *s = Complex64::new(0.0, 0.0));
        let out = propagate(&wave, &link, 0).unwrap();
        let l = link.total_length_m();
        let g89 = link.gamma_per_w_m() * 8.0 / 9.0;
        for (a, b) in wave.x.iter().zip(&out.x) {
            let expect = a * Complex64::from_polar(1.0, g89 * a.norm_sqr() * l);
            let phase_err = (b / expect).arg().abs();
            assert!(phase_err < 1e-6, "phase error {phase_err}");
        }
    }

    #[test]
    fn lossless_noiseless_steps_conserve_energy() {
        let mut link = link_setup2();
        link.attenuation_db_per_km = 1e-12;
        noiseless(&mut link);
        let n = 2048;
        let wave = random_wave(n, 5e-3, 4.0 * link.baud_rate_hz, 3);
        let out = propagate(&wave, &link, 0).unwrap();
        let e_in: f64 = wave.x.iter().chain(&wave.y).map(|s| s.norm_sqr()).sum();
        let e_out: f64 = out.x.iter().chain(&out.y).map(|s| s.norm_sqr()).sum();
        assert!(((e_out - e_in) / e_in).abs() < 1e-10, "energy drift {}", (e_out - e_in) / e_in);
    }

    #[test]
    fn step_halving_self_consistency() {
        // Setup-2 single span at a bold launch power; halving the nonlinear
        // phase budget must barely change the output field.
        let mut link = link_setup2();
        noiseless(&mut link);
        link.launch_power_dbm_per_pol = 9.0;
        let n = 8192;
        let wave = random_wave(n, 2.0 * crate::util::dbm_to_watts(9.0), 4.0 * link.baud_rate_hz, 21);
        let coarse = propagate(&wave, &link, 0).unwrap();
        link.ssfm = SsfmControl {
            max_nonlinear_phase_rad: link.ssfm.max_nonlinear_phase_rad / 2.0,
            ..link.ssfm
        };
        let fine = propagate(&wave, &link, 0).unwrap();
        let num: f64 = coarse
            .x
            .iter()
            .zip(&fine.x)
            .chain(coarse.y.iter().zip(&fine.y))
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let den: f64 = fine
            .x
            .iter()
            .chain(&fine.y)
            .map(|s| s.norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(num / den < 1e-4, "step-halving residual {}", num / den);
    }

    #[test]
    fn deterministic_given_seed_and_seed_changes_only_noise() {
        let link = link_setup1();
        let n = 512;
        let wave = random_wave(n, 1e-4, 4.0 * link.baud_rate_hz, 1);
        let a = propagate(&wave, &link, 42).unwrap();
        let b = propagate(&wave, &link, 42).unwrap();
        assert_eq!(a, b, "same seed, same output");
        let c = propagate(&wave, &link, 43).unwrap();
        assert_ne!(a, c, "different ASE realization");

        // noiseless: seeds are irrelevant
        let mut quiet = link.clone();
        noiseless(&mut quiet);
        let d = propagate(&wave, &quiet, 1).unwrap();
        let e = propagate(&wave, &quiet, 2).unwrap();
        assert_eq!(d, e);
    }

    #[test]
    fn log_step_policy_runs_and_converges() {
        let mut link = link_setup2();
        noiseless(&mut link);
        link.ssfm.log_steps_per_span = Some(400);
        let n = 2048;
        let wave = random_wave(n, 5e-3, 4.0 * link.baud_rate_hz, 12);
        let a = propagate(&wave, &link, 0).unwrap();
        link.ssfm.log_steps_per_span = Some(800);
        let b = propagate(&wave, &link, 0).unwrap();
        let num: f64 = a.x.iter().zip(&b.x).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = b.x.iter().map(|s| s.norm_sqr()).sum::<f64>().sqrt();
        assert!(num / den < 1e-3, "log-step convergence {}", num / den);
    }
}
