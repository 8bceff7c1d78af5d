//! Device configuration file (TOML) and the built-in preset.
//!
//! All frequencies and rates in the file are ordinary frequencies [Hz]; powers are
//! in dBm and losses/gains in dB. Conversion to the internal angular units happens
//! in [`DeviceConfig::resonators`] and friends.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    drive_photon_number, operating_point, ConverterState, DriveConfig, MechanicalMode,
    ResonatorMode,
};
use crate::scattering::LineCalibration;
use crate::thermal::{thermal_occupancy, HeatingModel};
use crate::units::hz_to_angular;

pub const PRESET_NAMES: [&str; 1] = ["fink2018"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorSection {
    pub freq_hz: f64,
    pub kappa_in_hz: f64,
    pub kappa_ex_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanicsSection {
    pub freq_hz: f64,
    pub gamma_hz: f64,
    /// Bath occupancy. Computed from `temperature_k` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_bath: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub power_dbm: f64,
    pub attenuation_db: f64,
    pub g0_hz: f64,
    /// Resonator minus drive frequency; defaults to the mechanical frequency
    /// (red sideband).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_hz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default)]
    pub delay_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSection {
    #[serde(default)]
    pub beta1_db: f64,
    #[serde(default)]
    pub beta2_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatingSection {
    pub amplitude: f64,
    pub exponent: f64,
    pub reference_n: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// Both cooperativities must exceed this for the added-noise estimate to apply.
    #[serde(default = "default_threshold")]
    pub cooperativity_threshold: f64,
}

fn default_threshold() -> f64 {
    10.0
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            cooperativity_threshold: default_threshold(),
        }
    }
}

/// Range of waveguide coupling ratios used for expected-efficiency bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaBandSection {
    pub eta1: [f64; 2],
    pub eta2: [f64; 2],
}

impl Default for EtaBandSection {
    fn default() -> Self {
        Self {
            eta1: [0.85, 0.92],
            eta2: [0.64, 0.68],
        }
    }
}

/// Optional override of the operating point by target cooperativities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingPointSection {
    pub cooperativities: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    #[serde(default)]
    pub name: String,
    pub resonator1: ResonatorSection,
    pub resonator2: ResonatorSection,
    pub mechanics: MechanicsSection,
    pub drive1: DriveSection,
    pub drive2: DriveSection,
    #[serde(default)]
    pub calibration1: CalibrationSection,
    #[serde(default)]
    pub calibration2: CalibrationSection,
    #[serde(default)]
    pub gains: GainSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heating1: Option<HeatingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heating2: Option<HeatingSection>,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub eta_band: EtaBandSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operating_point: Option<OperatingPointSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<super::SweepSpec>,
}

impl DeviceConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: DeviceConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "fink2018" => Ok(fink2018()),
            other => Err(Error::Config(format!(
                "unknown preset {other:?} (available: {})",
                PRESET_NAMES.join(", ")
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.resonators().map_err(wrap)?;
        self.mechanics().map_err(wrap)?;
        self.drives().map_err(wrap)?;
        self.calibrations().map_err(wrap)?;
        self.heating().map_err(wrap)?;
        if self.mechanics.n_bath.is_none() && self.mechanics.temperature_k.is_none() {
            return Err(Error::Config(
                "[mechanics] needs either n_bath or temperature_k".into(),
            ));
        }
        for band in [self.eta_band.eta1, self.eta_band.eta2] {
            if !(band[0] > 0.0 && band[0] <= band[1] && band[1] <= 1.0) {
                return Err(Error::Config(format!("invalid eta band {band:?}")));
            }
        }
        if let Some(op) = &self.operating_point {
            if op.cooperativities.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
                return Err(Error::Config("operating point cooperativities must be non-negative".into()));
            }
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        Ok(())
    }

    pub fn resonators(&self) -> Result<[ResonatorMode; 2]> {
        let make = |s: &ResonatorSection| {
            ResonatorMode::new(
                hz_to_angular(s.freq_hz),
                hz_to_angular(s.kappa_in_hz),
                hz_to_angular(s.kappa_ex_hz),
            )
        };
        Ok([make(&self.resonator1)?, make(&self.resonator2)?])
    }

    pub fn mechanics(&self) -> Result<MechanicalMode> {
        let omega_m = hz_to_angular(self.mechanics.freq_hz);
        let n_bath = match (self.mechanics.n_bath, self.mechanics.temperature_k) {
            (Some(n), _) => n,
            (None, Some(t)) => thermal_occupancy(omega_m, t),
            (None, None) => 0.0,
        };
        MechanicalMode::new(omega_m, hz_to_angular(self.mechanics.gamma_hz), n_bath)
    }

    pub fn drives(&self) -> Result<[DriveConfig; 2]> {
        let res = self.resonators()?;
        let detuning_default = self.mechanics.freq_hz;
        let make = |s: &DriveSection, r: &ResonatorMode| {
            let d = DriveConfig {
                p_applied: s.power_dbm,
                attenuation: s.attenuation_db,
                omega_d: r.omega - hz_to_angular(s.detuning_hz.unwrap_or(detuning_default)),
                g0: hz_to_angular(s.g0_hz),
            };
            d.validate().map(|_| d)
        };
        Ok([make(&self.drive1, &res[0])?, make(&self.drive2, &res[1])?])
    }

    pub fn calibrations(&self) -> Result<[LineCalibration; 2]> {
        Ok([
            LineCalibration::new(self.calibration1.phase_rad, self.calibration1.delay_s)?,
            LineCalibration::new(self.calibration2.phase_rad, self.calibration2.delay_s)?,
        ])
    }

    pub fn heating(&self) -> Result<[Option<HeatingModel>; 2]> {
        let make = |h: &Option<HeatingSection>| {
            h.map(|h| HeatingModel::new(h.amplitude, h.exponent, h.reference_n))
                .transpose()
        };
        Ok([make(&self.heating1)?, make(&self.heating2)?])
    }

    pub fn eta(&self) -> Result<[f64; 2]> {
        let r = self.resonators()?;
        Ok([r[0].eta(), r[1].eta()])
    }

    /// Operating point: explicit cooperativities if configured, else the drives.
    pub fn state(&self) -> Result<ConverterState> {
        let res = self.resonators()?;
        let mech = self.mechanics()?;
        let drives = self.drives()?;
        match &self.operating_point {
            Some(op) => {
                ConverterState::from_cooperativities(&res, &mech, op.cooperativities, [drives[0].g0, drives[1].g0])
            }
            None => operating_point(&drives, &res, &mech),
        }
    }

    /// Copy of this config with the drive powers replaced.
    pub fn with_powers(&self, p1: f64, p2: f64) -> Self {
        let mut c = self.clone();
        c.drive1.power_dbm = p1;
        c.drive2.power_dbm = p2;
        c.operating_point = None;
        c
    }

    /// Copy of this config pinned at the given cooperativities.
    pub fn with_cooperativities(&self, coop: [f64; 2]) -> Self {
        let mut c = self.clone();
        c.operating_point = Some(OperatingPointSection {
            cooperativities: coop,
        });
        c
    }
}

/// The two-mode aluminum-on-silicon-nitride converter: resonators at 7.444 and
/// 9.308 GHz, a 4.118 MHz nanobeam with 7 Hz damping.
///
/// Linewidths follow from the intrinsic quality factors (2.2e5, 5.5e4) and the
/// best waveguide coupling ratios (0.92, 0.68). The heating model is pinned so that
/// both resonators sit at 4 photons for -5 dBm drives; its exponent is a free
/// choice.
pub fn fink2018() -> DeviceConfig {
    let resonator = |freq_hz: f64, q_in: f64, eta: f64| {
        let kappa_in_hz = freq_hz / q_in;
        ResonatorSection {
            freq_hz,
            kappa_in_hz,
            kappa_ex_hz: kappa_in_hz * eta / (1.0 - eta),
        }
    };
    let resonator1 = resonator(7.444e9, 2.2e5, 0.92);
    let resonator2 = resonator(9.308e9, 5.5e4, 0.68);
    let mechanics = MechanicsSection {
        freq_hz: 4.118e6,
        gamma_hz: 7.0,
        n_bath: Some(60.0),
        temperature_k: None,
    };
    let drive = |att: f64, g0: f64| DriveSection {
        power_dbm: -5.0,
        attenuation_db: att,
        g0_hz: g0,
        detuning_hz: None,
    };
    let drive1 = drive(69.0, 33.0);
    let drive2 = drive(70.4, 44.0);

    let heating_for = |r: &ResonatorSection, d: &DriveSection| {
        let res = ResonatorMode::new(
            hz_to_angular(r.freq_hz),
            hz_to_angular(r.kappa_in_hz),
            hz_to_angular(r.kappa_ex_hz),
        )
        .expect("preset resonator is valid");
        let delta = hz_to_angular(mechanics.freq_hz);
        let n = drive_photon_number(d.power_dbm, d.attenuation_db, res.omega - delta, &res, delta)
            .expect("preset drive is valid");
        HeatingSection {
            amplitude: 4.0,
            exponent: 0.5,
            reference_n: n,
        }
    };
    let heating1 = Some(heating_for(&resonator1, &drive1));
    let heating2 = Some(heating_for(&resonator2, &drive2));

    DeviceConfig {
        name: "fink2018".into(),
        resonator1,
        resonator2,
        mechanics,
        drive1,
        drive2,
        calibration1: CalibrationSection {
            phase_rad: 0.0,
            delay_s: 50e-9,
        },
        calibration2: CalibrationSection {
            phase_rad: 0.0,
            delay_s: 50e-9,
        },
        gains: GainSection::default(),
        heating1,
        heating2,
        noise: NoiseSection::default(),
        eta_band: EtaBandSection::default(),
        operating_point: None,
        sweep: None,
    }
}
