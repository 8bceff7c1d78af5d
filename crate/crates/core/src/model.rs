//! Device parameters and the drive-to-operating-point algebra.
//!
//! All rates are angular [rad/s]. A red-sideband drive on resonator `i` sits at
//! `omega_d = omega_i - omega_m`, so the detuning `Delta_i = omega_i - omega_d`
//! equals the mechanical frequency.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::dbm_to_watts;

/// CODATA 2018 values (exact in the 2019 SI).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant [J s].
    pub hbar: f64,
    /// Boltzmann constant [J/K].
    pub k_boltzmann: f64,
}

impl PhysicalConstants {
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const K_B: f64 = 1.380_649e-23;

    pub const CODATA: PhysicalConstants = PhysicalConstants {
        hbar: Self::HBAR,
        k_boltzmann: Self::K_B,
    };
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA
    }
}

/// One microwave LC mode coupled to a measurement waveguide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorMode {
    /// Resonance frequency [rad/s].
    pub omega: f64,
    /// Intrinsic loss rate [rad/s].
    pub kappa_in: f64,
    /// Waveguide (external) coupling rate [rad/s].
    pub kappa_ex: f64,
}

impl ResonatorMode {
    pub fn new(omega: f64, kappa_in: f64, kappa_ex: f64) -> Result<Self> {
        let mode = Self {
            omega,
            kappa_in,
            kappa_ex,
        };
        mode.validate()?;
        Ok(mode)
    }

    /// Builds a mode from its total linewidth and waveguide coupling ratio.
    pub fn from_linewidth(omega: f64, kappa: f64, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::invalid(format!("eta must lie in (0, 1], got {eta}")));
        }
        let kappa_ex = eta * kappa;
        Self::new(omega, (kappa - kappa_ex).max(0.0), kappa_ex)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::invalid(format!(
                "resonator frequency must be positive, got {}",
                self.omega
            )));
        }
        if !(self.kappa_in >= 0.0 && self.kappa_in.is_finite()) {
            return Err(Error::invalid(format!(
                "kappa_in must be non-negative, got {}",
                self.kappa_in
            )));
        }
        if !(self.kappa_ex > 0.0 && self.kappa_ex.is_finite()) {
            return Err(Error::invalid(format!(
                "kappa_ex must be positive, got {}",
                self.kappa_ex
            )));
        }
        Ok(())
    }

    /// Total linewidth `kappa_in + kappa_ex`.
    #[inline]
    pub fn kappa(&self) -> f64 {
        self.kappa_in + self.kappa_ex
    }

    /// Waveguide coupling ratio `kappa_ex / kappa`.
    #[inline]
    pub fn eta(&self) -> f64 {
        self.kappa_ex / self.kappa()
    }
}

/// The mechanical mode mediating the conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanicalMode {
    /// [rad/s]
    pub omega_m: f64,
    /// Intrinsic damping [rad/s].
    pub gamma_m: f64,
    /// Thermal bath occupancy [quanta].
    pub n_bath: f64,
}

impl MechanicalMode {
    pub fn new(omega_m: f64, gamma_m: f64, n_bath: f64) -> Result<Self> {
        let mode = Self {
            omega_m,
            gamma_m,
            n_bath,
        };
        mode.validate()?;
        Ok(mode)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_m > 0.0 && self.omega_m.is_finite()) {
            return Err(Error::invalid(format!(
                "mechanical frequency must be positive, got {}",
                self.omega_m
            )));
        }
        if !(self.gamma_m > 0.0 && self.gamma_m.is_finite()) {
            return Err(Error::invalid(format!(
                "gamma_m must be positive, got {}",
                self.gamma_m
            )));
        }
        if !(self.n_bath >= 0.0 && self.n_bath.is_finite()) {
            return Err(Error::invalid(format!(
                "bath occupancy must be non-negative, got {}",
                self.n_bath
            )));
        }
        Ok(())
    }
}

/// Pump tone applied to one resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    /// Power at the room-temperature source [dBm].
    pub p_applied: f64,
    /// Input-line loss from source to the on-chip waveguide [dB].
    pub attenuation: f64,
    /// Drive frequency [rad/s].
    pub omega_d: f64,
    /// Vacuum electromechanical coupling [rad/s].
    pub g0: f64,
}

impl DriveConfig {
    /// Drive placed on the red sideband of `res`, i.e. detuned by `omega_m`.
    pub fn red_sideband(
        res: &ResonatorMode,
        mech: &MechanicalMode,
        p_applied: f64,
        attenuation: f64,
        g0: f64,
    ) -> Self {
        Self {
            p_applied,
            attenuation,
            omega_d: res.omega - mech.omega_m,
            g0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.attenuation >= 0.0) {
            return Err(Error::invalid(format!(
                "attenuation must be non-negative, got {}",
                self.attenuation
            )));
        }
        if !(self.g0 >= 0.0 && self.g0.is_finite()) {
            return Err(Error::invalid(format!("g0 must be non-negative, got {}", self.g0)));
        }
        if !(self.omega_d > 0.0 && self.omega_d.is_finite()) {
            return Err(Error::invalid(format!(
                "drive frequency must be positive, got {}",
                self.omega_d
            )));
        }
        if self.p_applied.is_nan() || self.p_applied == f64::INFINITY {
            return Err(Error::invalid("drive power must be finite or -inf"));
        }
        Ok(())
    }

    /// `Delta = omega_res - omega_d`.
    #[inline]
    pub fn detuning(&self, res: &ResonatorMode) -> f64 {
        res.omega - self.omega_d
    }

    /// On-chip input power [W].
    #[inline]
    pub fn input_power_watts(&self) -> f64 {
        dbm_to_watts(self.p_applied - self.attenuation)
    }
}

/// Operating point derived from the drives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConverterState {
    /// Intra-resonator drive photons per mode.
    pub n_drive: [f64; 2],
    /// Parametric coupling `g0 * sqrt(n)` per mode [rad/s].
    pub g: [f64; 2],
    /// Optomechanical damping `4 g^2 / kappa` per mode [rad/s].
    pub big_gamma: [f64; 2],
    /// Cooperativity `big_gamma / gamma_m` per mode.
    pub coop: [f64; 2],
    /// Back-action damped mechanical linewidth [rad/s].
    pub total_linewidth: f64,
    /// Drive detuning `omega_i - omega_d,i` per mode [rad/s].
    pub detuning: [f64; 2],
}

impl ConverterState {
    /// State for given parametric couplings. The drive photon numbers are backed out
    /// from `g0` (zero where `g0` is zero).
    pub fn from_couplings(
        resonators: &[ResonatorMode; 2],
        mech: &MechanicalMode,
        g: [f64; 2],
        g0: [f64; 2],
        detuning: [f64; 2],
    ) -> Result<Self> {
        mech.validate()?;
        let mut state = Self {
            n_drive: [0.0; 2],
            g,
            big_gamma: [0.0; 2],
            coop: [0.0; 2],
            total_linewidth: mech.gamma_m,
            detuning,
        };
        for i in 0..2 {
            resonators[i].validate()?;
            if !(g[i] >= 0.0 && g[i].is_finite()) {
                return Err(Error::invalid(format!("coupling g{} must be non-negative", i + 1)));
            }
            if g0[i] > 0.0 {
                state.n_drive[i] = (g[i] / g0[i]).powi(2);
            }
            state.big_gamma[i] = 4.0 * g[i] * g[i] / resonators[i].kappa();
            state.coop[i] = state.big_gamma[i] / mech.gamma_m;
            state.total_linewidth += state.big_gamma[i];
        }
        Ok(state)
    }

    /// State realizing the requested cooperativities with red-sideband drives.
    pub fn from_cooperativities(
        resonators: &[ResonatorMode; 2],
        mech: &MechanicalMode,
        coop: [f64; 2],
        g0: [f64; 2],
    ) -> Result<Self> {
        if coop.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::invalid("cooperativities must be non-negative"));
        }
        let g = [0, 1].map(|i| (coop[i] * resonators[i].kappa() * mech.gamma_m / 4.0).sqrt());
        Self::from_couplings(resonators, mech, g, g0, [mech.omega_m; 2])
    }
}

/// Intra-resonator photon number for a coherent drive,
/// `n = P_in / (hbar omega_d) * 4 kappa_ex / (kappa^2 + 4 Delta^2)`.
///
/// `p_applied` and `attenuation` are combined on the dB scale before conversion to
/// watts.
pub fn drive_photon_number(
    p_applied: f64,
    attenuation: f64,
    omega_d: f64,
    res: &ResonatorMode,
    delta: f64,
) -> Result<f64> {
    if !(omega_d > 0.0 && omega_d.is_finite()) {
        return Err(Error::invalid(format!(
            "drive frequency must be positive, got {omega_d}"
        )));
    }
    res.validate()?;
    let p_in = dbm_to_watts(p_applied - attenuation);
    let photon_flux = p_in / (PhysicalConstants::HBAR * omega_d);
    let kappa = res.kappa();
    Ok(photon_flux * 4.0 * res.kappa_ex / (kappa * kappa + 4.0 * delta * delta))
}

/// `g = g0 * sqrt(n_drive)`.
pub fn coupling_rate(g0: f64, n_drive: f64) -> Result<f64> {
    if !(n_drive >= 0.0) {
        return Err(Error::invalid(format!(
            "drive photon number must be non-negative, got {n_drive}"
        )));
    }
    Ok(g0 * n_drive.sqrt())
}

pub fn operating_point(
    drives: &[DriveConfig; 2],
    resonators: &[ResonatorMode; 2],
    mech: &MechanicalMode,
) -> Result<ConverterState> {
    mech.validate()?;
    let mut g = [0.0; 2];
    let mut g0 = [0.0; 2];
    let mut detuning = [0.0; 2];
    let mut n_drive = [0.0; 2];
    for i in 0..2 {
        drives[i].validate()?;
        let delta = drives[i].detuning(&resonators[i]);
        n_drive[i] = drive_photon_number(
            drives[i].p_applied,
            drives[i].attenuation,
            drives[i].omega_d,
            &resonators[i],
            delta,
        )?;
        g[i] = coupling_rate(drives[i].g0, n_drive[i])?;
        g0[i] = drives[i].g0;
        detuning[i] = delta;
    }
    let mut state = ConverterState::from_couplings(resonators, mech, g, g0, detuning)?;
    // keep the forward-computed photon numbers rather than (g/g0)^2
    state.n_drive = n_drive;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::hz_to_angular;
    use proptest::prelude::*;

    fn res(f_hz: f64, kappa_hz: f64, kappa_ex_hz: f64) -> ResonatorMode {
        ResonatorMode::new(
            hz_to_angular(f_hz),
            hz_to_angular(kappa_hz - kappa_ex_hz),
            hz_to_angular(kappa_ex_hz),
        )
        .unwrap()
    }

    #[test]
    fn zero_power_gives_zero_photons() {
        let r = res(7.44e9, 200e3, 160e3);
        let n = drive_photon_number(f64::NEG_INFINITY, 69.0, r.omega, &r, 0.0).unwrap();
        assert_eq!(n, 0.0);
    }

    #[test]
    fn zero_detuning_overcoupled_reduces() {
        let r = ResonatorMode::new(hz_to_angular(7e9), 0.0, hz_to_angular(100e3)).unwrap();
        let wd = hz_to_angular(7e9);
        let n = drive_photon_number(-20.0, 50.0, wd, &r, 0.0).unwrap();
        let p = dbm_to_watts(-70.0);
        let expected = p / (PhysicalConstants::HBAR * wd) * 4.0 / r.kappa();
        assert!((n - expected).abs() <= 1e-14 * expected);
    }

    #[test]
    fn golden_photon_number() {
        // frozen from an independent 40-digit evaluation
        let r = res(7.444e9, 200e3, 160e3);
        let n = drive_photon_number(
            -6.0,
            69.0,
            hz_to_angular(7.440e9),
            &r,
            hz_to_angular(4.118e6),
        )
        .unwrap();
        let golden = 9_626.810_861_590_764;
        assert!((n - golden).abs() <= 1e-12 * golden, "{n}");
    }

    #[test]
    fn bad_drive_frequency() {
        let r = res(7.44e9, 200e3, 160e3);
        assert!(matches!(
            drive_photon_number(0.0, 0.0, 0.0, &r, 0.0),
            Err(Error::InvalidInput(_))
        ));
        assert!(drive_photon_number(0.0, 0.0, -1.0, &r, 0.0).is_err());
    }

    #[test]
    fn coupling_rate_cases() {
        let g0 = hz_to_angular(33.0);
        assert_eq!(coupling_rate(g0, 0.0).unwrap(), 0.0);
        assert_eq!(coupling_rate(g0, 1.0).unwrap(), g0);
        let g = coupling_rate(g0, 1e4).unwrap();
        assert!((g - hz_to_angular(3.3e3)).abs() <= 1e-12 * g);
        assert!(coupling_rate(g0, -1.0).is_err());
    }

    fn device() -> ([ResonatorMode; 2], MechanicalMode) {
        (
            [res(7.444e9, 420e3, 390e3), res(9.308e9, 530e3, 360e3)],
            MechanicalMode::new(hz_to_angular(4.118e6), hz_to_angular(7.0), 60.0).unwrap(),
        )
    }

    #[test]
    fn zero_drive_operating_point() {
        let (r, m) = device();
        let drives = [0, 1].map(|i| {
            DriveConfig::red_sideband(&r[i], &m, f64::NEG_INFINITY, 69.0, hz_to_angular(33.0))
        });
        let s = operating_point(&drives, &r, &m).unwrap();
        assert_eq!(s.g, [0.0; 2]);
        assert_eq!(s.big_gamma, [0.0; 2]);
        assert_eq!(s.coop, [0.0; 2]);
        assert_eq!(s.total_linewidth, m.gamma_m);
        for d in s.detuning {
            assert!((d / m.omega_m - 1.0).abs() < 1e-12);
        }
    }

    /// Solves the photon-number formula for the source power that yields a target
    /// cooperativity, independently of `operating_point`.
    fn power_for_coop(c: f64, r: &ResonatorMode, m: &MechanicalMode, g0: f64, att: f64) -> f64 {
        let n = c * m.gamma_m * r.kappa() / (4.0 * g0 * g0);
        let wd = r.omega - m.omega_m;
        let factor = 4.0 * r.kappa_ex / (r.kappa().powi(2) + 4.0 * m.omega_m.powi(2));
        let p_w = n * PhysicalConstants::HBAR * wd / factor;
        10.0 * (p_w / 1e-3).log10() + att
    }

    #[test]
    fn matched_cooperativity_35() {
        let (r, m) = device();
        let g0 = [hz_to_angular(33.0), hz_to_angular(44.0)];
        let att = [69.0, 70.4];
        let drives = [0, 1].map(|i| {
            let p = power_for_coop(35.0, &r[i], &m, g0[i], att[i]);
            DriveConfig::red_sideband(&r[i], &m, p, att[i], g0[i])
        });
        let s = operating_point(&drives, &r, &m).unwrap();
        for c in s.coop {
            assert!((c - 35.0).abs() < 1e-9, "{c}");
        }
        assert!((s.total_linewidth - 71.0 * m.gamma_m).abs() < 1e-9 * s.total_linewidth);
    }

    #[test]
    fn matched_122_bandwidth() {
        let (r, m) = device();
        let s = ConverterState::from_cooperativities(&r, &m, [122.0; 2], [1.0; 2]).unwrap();
        let gamma_hz = s.total_linewidth / std::f64::consts::TAU;
        assert!((gamma_hz - 1715.0).abs() < 1e-6);
        assert!((gamma_hz - 1720.0).abs() / 1720.0 < 0.01);
    }

    proptest! {
        #[test]
        fn photon_number_monotone_in_power(p in -60.0f64..20.0, dp in 0.01f64..10.0) {
            let r = res(7.444e9, 420e3, 390e3);
            let wd = r.omega - hz_to_angular(4.118e6);
            let a = drive_photon_number(p, 69.0, wd, &r, r.omega - wd).unwrap();
            let b = drive_photon_number(p + dp, 69.0, wd, &r, r.omega - wd).unwrap();
            prop_assert!(b > a);
        }

        #[test]
        fn coupling_scales_as_sqrt(g0 in 0.0f64..1e4, n in 0.0f64..1e9) {
            let a = coupling_rate(g0, 4.0 * n).unwrap();
            let b = 2.0 * coupling_rate(g0, n).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
        }

        #[test]
        fn operating_point_is_pure(p1 in -30.0f64..5.0, p2 in -30.0f64..5.0) {
            let (r, m) = device();
            let drives = [
                DriveConfig::red_sideband(&r[0], &m, p1, 69.0, hz_to_angular(33.0)),
                DriveConfig::red_sideband(&r[1], &m, p2, 70.4, hz_to_angular(44.0)),
            ];
            let a = operating_point(&drives, &r, &m).unwrap();
            let b = operating_point(&drives, &r, &m).unwrap();
            for i in 0..2 {
                prop_assert_eq!(a.g[i].to_bits(), b.g[i].to_bits());
                prop_assert_eq!(a.coop[i].to_bits(), b.coop[i].to_bits());
                let bg = 4.0 * a.g[i].powi(2) / r[i].kappa();
                prop_assert!((a.big_gamma[i] - bg).abs() <= 1e-12 * bg.max(1e-300));
            }
            prop_assert_eq!(a.total_linewidth.to_bits(), b.total_linewidth.to_bits());
            let sum = m.gamma_m + a.big_gamma[0] + a.big_gamma[1];
            prop_assert!((a.total_linewidth - sum).abs() <= 1e-12 * sum);
        }
    }
}
