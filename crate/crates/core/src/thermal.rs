//! Occupancy and noise bookkeeping.
//!
//! The resonator heating floor uses the weighted-bath form
//! `n_m = (n_b + C n_r) / (C + 1)` together with a phenomenological power law for
//! the resonator occupancy versus drive photon number. Both are model choices that
//! are fit to data, not derived here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PhysicalConstants;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    /// Mechanical occupancy [phonons].
    pub n_mech: f64,
    /// Resonator occupancy per mode [photons].
    pub n_res: [f64; 2],
    /// Added output noise per port [photons / s / Hz].
    pub n_add: [f64; 2],
}

/// `n_r(n_d) = amplitude * (n_d / reference_n)^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatingModel {
    pub amplitude: f64,
    pub exponent: f64,
    pub reference_n: f64,
}

impl HeatingModel {
    pub fn new(amplitude: f64, exponent: f64, reference_n: f64) -> Result<Self> {
        let m = Self {
            amplitude,
            exponent,
            reference_n,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::invalid("heating amplitude must be non-negative"));
        }
        if !self.exponent.is_finite() {
            return Err(Error::invalid("heating exponent must be finite"));
        }
        if !(self.reference_n > 0.0 && self.reference_n.is_finite()) {
            return Err(Error::invalid("heating reference photon number must be positive"));
        }
        Ok(())
    }
}

/// Bose-Einstein occupancy `1 / (exp(hbar omega / k_B T) - 1)`; zero at `T = 0`.
pub fn thermal_occupancy(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    let x = PhysicalConstants::HBAR * omega / (PhysicalConstants::K_B * temperature);
    1.0 / x.exp_m1()
}

/// Inverse of [`thermal_occupancy`]: mode temperature [K] for occupancy `n`.
pub fn occupancy_temperature(omega: f64, n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    PhysicalConstants::HBAR * omega / (PhysicalConstants::K_B * (1.0 / n).ln_1p())
}

/// Sideband-cooled mechanical occupancy with a resonator heating floor,
/// `(n_bath + C n_res) / (C + 1)`.
pub fn cooled_occupancy(n_bath: f64, coop: f64, n_res: f64) -> f64 {
    (n_bath + coop * n_res) / (coop + 1.0)
}

pub fn heating_occupancy(model: &HeatingModel, n_drive: f64) -> Result<f64> {
    if !(n_drive > 0.0) {
        return Err(Error::invalid(format!(
            "drive photon number must be positive, got {n_drive}"
        )));
    }
    Ok(model.amplitude * (n_drive / model.reference_n).powf(model.exponent))
}

/// Noise added to a converted signal at each output port,
/// `eta_i (n_r1 + n_r2 + 2 n_m)`.
///
/// Valid for large, similar cooperativities; the caller checks the regime.
pub fn added_noise(eta: [f64; 2], n_res: [f64; 2], n_mech: f64) -> [f64; 2] {
    let total = n_res[0] + n_res[1] + 2.0 * n_mech;
    [eta[0] * total, eta[1] * total]
}
