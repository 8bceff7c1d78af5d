//! Synthetic spectra from the forward models, with reproducible complex noise.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;

use super::config::DeviceConfig;
use super::linspace;
use crate::error::{Error, Result};
use crate::scattering::{
    conversion_spectrum, eit_reflection, s11_single, ComplexSpectrum, Port,
};
use crate::units::hz_to_angular;

/// Additive complex Gaussian noise with `E|n|^2 = sigma^2` per point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec { sigma: 0.0, seed: 0 };

    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("noise sigma must be >= 0, got {sigma}")));
        }
        Ok(Self { sigma, seed })
    }

    /// Noise level giving `snr_db` relative to a signal of mean power `signal_power`.
    pub fn from_snr_db(snr_db: f64, signal_power: f64, seed: u64) -> Result<Self> {
        Self::new((signal_power / 10f64.powf(snr_db / 10.0)).sqrt(), seed)
    }

    /// Adds noise in place. The draw sequence depends only on the seed and length.
    pub fn apply(&self, values: &mut [Complex64]) {
        if self.sigma == 0.0 {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let normal = Normal::new(0.0, self.sigma / std::f64::consts::SQRT_2)
            .expect("sigma is finite and non-negative");
        for v in values.iter_mut() {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            *v += Complex64::new(re, im);
        }
    }
}

/// Forward model used for synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthModel {
    /// Bare resonator `i` (0-based) with its line calibration, drives off.
    SingleReflection(usize),
    /// Reflection of resonator `i` with both drives on, lab-frame grid.
    Eit(usize),
    /// `S21` against signal detuning from the mechanical resonance.
    Conversion,
}

impl SynthModel {
    pub fn id(&self) -> String {
        match self {
            SynthModel::SingleReflection(i) => format!("single-reflection-{}", i + 1),
            SynthModel::Eit(i) => format!("eit-{}", i + 1),
            SynthModel::Conversion => "conversion".into(),
        }
    }
}

impl std::str::FromStr for SynthModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let which = |tail: &str| match tail {
            "1" => Ok(0),
            "2" => Ok(1),
            _ => Err(Error::invalid(format!("unknown resonator index in {s:?}"))),
        };
        match s {
            "conversion" => Ok(SynthModel::Conversion),
            _ => {
                if let Some(t) = s.strip_prefix("single-reflection-") {
                    Ok(SynthModel::SingleReflection(which(t)?))
                } else if let Some(t) = s.strip_prefix("eit-") {
                    Ok(SynthModel::Eit(which(t)?))
                } else {
                    Err(Error::invalid(format!(
                        "unknown model {s:?} (expected single-reflection-1|2, eit-1|2, conversion)"
                    )))
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Synthesized {
    pub spectrum: ComplexSpectrum,
    /// Generating parameters, in the units the matching fitter reports.
    pub truth: serde_json::Value,
}

pub const DEFAULT_POINTS: usize = 2001;

/// Default grid [Hz] for a model: reflection over +-5 kappa around the resonance,
/// EIT over +-6 Gamma around the resonance, conversion over +-5 Gamma of detuning.
pub fn default_grid(config: &DeviceConfig, model: SynthModel) -> Result<Vec<f64>> {
    let res = config.resonators()?;
    let span_hz = |center: f64, half: f64| {
        linspace((center - half) / TAU, (center + half) / TAU, DEFAULT_POINTS)
    };
    Ok(match model {
        SynthModel::SingleReflection(i) => span_hz(res[i].omega, 5.0 * res[i].kappa()),
        SynthModel::Eit(i) => span_hz(res[i].omega, 6.0 * config.state()?.total_linewidth),
        SynthModel::Conversion => span_hz(0.0, 5.0 * config.state()?.total_linewidth),
    })
}

/// Evaluates `model` on `grid` [Hz] (default grid when `None`) and adds noise.
pub fn synthesize_spectrum(
    config: &DeviceConfig,
    model: SynthModel,
    grid: Option<Vec<f64>>,
    noise: NoiseSpec,
) -> Result<Synthesized> {
    config.validate()?;
    let freq = match grid {
        Some(g) => g,
        None => default_grid(config, model)?,
    };
    let res = config.resonators()?;
    let mech = config.mechanics()?;
    let cal = config.calibrations()?;
    let (mut value, port, truth) = match model {
        SynthModel::SingleReflection(i) => {
            if i > 1 {
                return Err(Error::invalid("resonator index must be 0 or 1"));
            }
            let r = &res[i];
            let v: Vec<Complex64> = freq
                .iter()
                .map(|&f| s11_single(r, &cal[i], hz_to_angular(f)))
                .collect();
            let truth = json!({
                "omega_0": r.omega,
                "kappa": r.kappa(),
                "kappa_ex": r.kappa_ex,
                "phi": cal[i].phase_offset,
                "tau": cal[i].delay,
                "eta": r.eta(),
            });
            (v, Port::reflection(i), truth)
        }
        SynthModel::Eit(i) => {
            if i > 1 {
                return Err(Error::invalid("resonator index must be 0 or 1"));
            }
            let state = config.state()?;
            let drive = config.drives()?[i].omega_d;
            let v: Vec<Complex64> = freq
                .iter()
                .map(|&f| {
                    let lab = hz_to_angular(f);
                    cal[i].factor(lab) * eit_reflection(&res, &mech, &state, i, lab - drive)
                })
                .collect();
            let truth = json!({
                "g1": state.g[0],
                "g2": state.g[1],
                "gamma_m": mech.gamma_m,
                "omega_m": mech.omega_m,
                "C1": state.coop[0],
                "C2": state.coop[1],
                "total_linewidth": state.total_linewidth,
                "drive_omega": drive,
                "phi": cal[i].phase_offset,
                "tau": cal[i].delay,
            });
            (v, Port::reflection(i), truth)
        }
        SynthModel::Conversion => {
            let state = config.state()?;
            let detunings: Vec<f64> = freq.iter().map(|&f| hz_to_angular(f)).collect();
            let s = conversion_spectrum(&res, &mech, &state, &detunings)?;
            let truth = json!({
                "C1": state.coop[0],
                "C2": state.coop[1],
                "total_linewidth": state.total_linewidth,
                "fwhm_hz": state.total_linewidth / TAU,
            });
            (s.value, Port::S21, truth)
        }
    };
    noise.apply(&mut value);
    let truth = json!({
        "model": model.id(),
        "units": "rad/s",
        "noise_sigma": noise.sigma,
        "seed": noise.seed,
        "parameters": truth,
    });
    Ok(Synthesized {
        spectrum: ComplexSpectrum::new(freq, value, port)?,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::fink2018;

    #[test]
    fn zero_sigma_is_exact_forward_model() {
        let cfg = fink2018();
        let out = synthesize_spectrum(&cfg, SynthModel::SingleReflection(0), None, NoiseSpec::NONE)
            .unwrap();
        let res = cfg.resonators().unwrap();
        let cal = cfg.calibrations().unwrap();
        for (f, v) in out.spectrum.freq.iter().zip(&out.spectrum.value) {
            assert_eq!(*v, s11_single(&res[0], &cal[0], hz_to_angular(*f)));
        }
        assert_eq!(out.spectrum.len(), DEFAULT_POINTS);
    }

    #[test]
    fn same_seed_same_bits() {
        let cfg = fink2018();
        let noise = NoiseSpec::new(0.03, 17).unwrap();
        let a = synthesize_spectrum(&cfg, SynthModel::Eit(1), None, noise).unwrap();
        let b = synthesize_spectrum(&cfg, SynthModel::Eit(1), None, noise).unwrap();
        assert_eq!(a.spectrum, b.spectrum);
        let c = synthesize_spectrum(&cfg, SynthModel::Eit(1), None, NoiseSpec { seed: 18, ..noise })
            .unwrap();
        assert_ne!(a.spectrum, c.spectrum);
    }

    #[test]
    fn noise_power_matches_sigma() {
        let mut v = vec![Complex64::new(0.0, 0.0); 200_000];
        NoiseSpec::new(0.1, 3).unwrap().apply(&mut v);
        let p = v.iter().map(|z| z.norm_sqr()).sum::<f64>() / v.len() as f64;
        assert!((p / 0.01 - 1.0).abs() < 0.01, "{p}");
        let s = NoiseSpec::from_snr_db(30.0, 1.0, 0).unwrap();
        assert!((s.sigma - 10f64.powf(-1.5)).abs() < 1e-15);
        assert!(NoiseSpec::new(-1.0, 0).is_err());
    }

    #[test]
    fn model_ids_parse() {
        for m in [SynthModel::SingleReflection(1), SynthModel::Eit(0), SynthModel::Conversion] {
            assert_eq!(m.id().parse::<SynthModel>().unwrap(), m);
        }
        assert!("eit-3".parse::<SynthModel>().is_err());
    }
}
