//! Coherent scattering response of the two-resonator converter.
//!
//! Mode amplitudes obey the linearized Langevin equations in the rotating frame of
//! each drive (rotating-wave approximation, red-sideband drives). For a probe at
//! rotating-frame frequency `omega` the steady state satisfies `M x = K a_in` with
//!
//! ```text
//!     | kappa_1/2 + i(Delta_1 - omega)   0                                i g_1                        |
//! M = | 0                                kappa_2/2 + i(Delta_2 - omega)   i g_2                        |
//!     | i g_1                            i g_2                            gamma_m/2 + i(omega_m - omega) |
//! ```
//!
//! and `K = diag(sqrt(kappa_ex,1), sqrt(kappa_ex,2), sqrt(gamma_m))`. The output field
//! is taken as `a_out = a_in - K x`, so `S = I - K M^-1 K`. This global sign makes the
//! decoupled resonator diagonal equal `1 - kappa_ex / (kappa/2 + i(omega_0 - omega))`;
//! the opposite convention differs by an overall factor of -1 and leaves every
//! power ratio unchanged.

use nalgebra::{Complex, DMatrix, Matrix3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ConverterState, MechanicalMode, ResonatorMode};
use crate::units::{angular_to_hz, hz_to_angular};

/// 3x3 scattering matrix. Index 0 and 1 are the resonator waveguide ports, index 2
/// the mechanical bath.
pub type SMatrix = Matrix3<Complex64>;

const I: Complex64 = Complex::new(0.0, 1.0);
const ONE: Complex64 = Complex::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Port {
    S11,
    S22,
    S21,
    S12,
}

impl Port {
    pub fn as_str(&self) -> &'static str {
        match self {
            Port::S11 => "S11",
            Port::S22 => "S22",
            Port::S21 => "S21",
            Port::S12 => "S12",
        }
    }

    /// Reflection label of resonator `which` (0-based).
    pub fn reflection(which: usize) -> Port {
        if which == 0 {
            Port::S11
        } else {
            Port::S22
        }
    }
}

impl std::str::FromStr for Port {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S11" => Ok(Port::S11),
            "S22" => Ok(Port::S22),
            "S21" => Ok(Port::S21),
            "S12" => Ok(Port::S12),
            other => Err(Error::Format(format!("unknown port label {other:?}"))),
        }
    }
}

impl std::fmt::Display for Port {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Complex scattering data on a strictly increasing frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    /// Probe frequencies [Hz].
    pub freq: Vec<f64>,
    pub value: Vec<Complex64>,
    pub port: Port,
}

impl ComplexSpectrum {
    pub fn new(freq: Vec<f64>, value: Vec<Complex64>, port: Port) -> Result<Self> {
        check_grid(&freq, value.len())?;
        Ok(Self { freq, value, port })
    }

    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }

    /// Probe frequencies as angular frequencies.
    pub fn omega(&self) -> impl Iterator<Item = f64> + '_ {
        self.freq.iter().map(|&f| hz_to_angular(f))
    }

    /// `|S|^2` at every point.
    pub fn to_power(&self) -> PowerSpectrum {
        PowerSpectrum {
            detuning: self.freq.clone(),
            power: self.value.iter().map(|v| v.norm_sqr()).collect(),
        }
    }
}

/// Real-valued power spectrum, e.g. `|S21|^2` against signal detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    /// [Hz]
    pub detuning: Vec<f64>,
    pub power: Vec<f64>,
}

impl PowerSpectrum {
    pub fn new(detuning: Vec<f64>, power: Vec<f64>) -> Result<Self> {
        check_grid(&detuning, power.len())?;
        Ok(Self { detuning, power })
    }

    pub fn len(&self) -> usize {
        self.detuning.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detuning.is_empty()
    }
}

fn check_grid(freq: &[f64], n_values: usize) -> Result<()> {
    if freq.is_empty() {
        return Err(Error::invalid("spectrum must contain at least one point"));
    }
    if freq.len() != n_values {
        return Err(Error::invalid(format!(
            "frequency grid has {} points but {} values were given",
            freq.len(),
            n_values
        )));
    }
    if freq.iter().any(|f| !f.is_finite()) {
        return Err(Error::invalid("frequency grid contains non-finite values"));
    }
    if freq.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("frequency grid must be strictly increasing"));
    }
    Ok(())
}

/// Cable phase and delay between the reference plane and the instrument.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LineCalibration {
    /// Global phase offset [rad].
    pub phase_offset: f64,
    /// Signal delay [s].
    pub delay: f64,
}

impl LineCalibration {
    pub const NONE: LineCalibration = LineCalibration {
        phase_offset: 0.0,
        delay: 0.0,
    };

    pub fn new(phase_offset: f64, delay: f64) -> Result<Self> {
        if !(delay >= 0.0 && delay.is_finite()) || !phase_offset.is_finite() {
            return Err(Error::invalid(format!(
                "invalid line calibration (phase {phase_offset}, delay {delay})"
            )));
        }
        Ok(Self {
            phase_offset,
            delay,
        })
    }

    /// `exp(-i (phi + omega tau))` at lab angular frequency `omega`.
    #[inline]
    pub fn factor(&self, omega: f64) -> Complex64 {
        Complex64::from_polar(1.0, -(self.phase_offset + omega * self.delay))
    }
}

/// Single-resonator reflection including line phase and delay,
/// `exp(-i(phi + omega tau)) (1 - kappa_ex / (kappa/2 + i(omega_0 - omega)))`.
pub fn s11_single(res: &ResonatorMode, cal: &LineCalibration, omega: f64) -> Complex64 {
    let denom = Complex64::new(res.kappa() / 2.0, res.omega - omega);
    cal.factor(omega) * (ONE - res.kappa_ex / denom)
}

/// Two-tone EIT reflection of resonator `which` (0 or 1) at rotating-frame
/// frequency `omega`.
///
/// No line calibration is applied; multiply by [`LineCalibration::factor`] to model
/// raw data.
pub fn eit_reflection(
    resonators: &[ResonatorMode; 2],
    mech: &MechanicalMode,
    state: &ConverterState,
    which: usize,
    omega: f64,
) -> Complex64 {
    let other = 1 - which;
    let chi_r = [0, 1].map(|i| {
        ONE / Complex64::new(resonators[i].kappa() / 2.0, state.detuning[i] - omega)
    });
    let chi_m = ONE / Complex64::new(mech.gamma_m / 2.0, mech.omega_m - omega);
    let g2 = [state.g[0] * state.g[0], state.g[1] * state.g[1]];
    let num = resonators[which].kappa_ex * chi_r[which] * (ONE + g2[other] * chi_m * chi_r[other]);
    let den = ONE + chi_m * (g2[0] * chi_r[0] + g2[1] * chi_r[1]);
    ONE - num / den
}

/// Bidirectional on-resonance conversion efficiency
/// `eta_1 eta_2 4 C_1 C_2 / (1 + C_1 + C_2)^2`.
pub fn conversion_efficiency(coop: [f64; 2], eta: [f64; 2]) -> f64 {
    let d = 1.0 + coop[0] + coop[1];
    eta[0] * eta[1] * 4.0 * coop[0] * coop[1] / (d * d)
}

/// On-resonance reflection `(1 - 2 eta_i (1 + C_j) / (1 + C_i + C_j))^2`.
pub fn reflection_on_resonance(coop_i: f64, coop_j: f64, eta_i: f64) -> f64 {
    let r = 1.0 - 2.0 * eta_i * (1.0 + coop_j) / (1.0 + coop_i + coop_j);
    r * r
}

/// Diagonal of the dynamical matrix and the coupling column, in that order.
fn arrowhead(
    resonators: &[ResonatorMode; 2],
    mech: &MechanicalMode,
    state: &ConverterState,
    omega: f64,
) -> ([Complex64; 3], [Complex64; 2]) {
    let diag = [
        Complex64::new(resonators[0].kappa() / 2.0, state.detuning[0] - omega),
        Complex64::new(resonators[1].kappa() / 2.0, state.detuning[1] - omega),
        Complex64::new(mech.gamma_m / 2.0, mech.omega_m - omega),
    ];
    (diag, [I * state.g[0], I * state.g[1]])
}

fn port_rates(resonators: &[ResonatorMode; 2], mech: &MechanicalMode) -> [f64; 3] {
    [
        resonators[0].kappa_ex.sqrt(),
        resonators[1].kappa_ex.sqrt(),
        mech.gamma_m.sqrt(),
    ]
}

/// Full 3-port scattering matrix from the Langevin equations.
///
/// The dynamical matrix has arrowhead structure (diagonal resonator block, coupled
/// only through the mechanics), so it is inverted in closed form via the Schur
/// complement of the mechanical entry.
pub fn langevin_smatrix(
    resonators: &[ResonatorMode; 2],
    mech: &MechanicalMode,
    state: &ConverterState,
    omega: f64,
) -> Result<SMatrix> {
    let (d, z) = arrowhead(resonators, mech, state, omega);
    if d[0] == Complex64::new(0.0, 0.0) || d[1] == Complex64::new(0.0, 0.0) {
        return Err(Error::Singular { omega });
    }
    let y = [z[0] / d[0], z[1] / d[1]];
    let schur = d[2] - z[0] * y[0] - z[1] * y[1];
    if schur.norm() == 0.0 || !schur.is_finite() {
        return Err(Error::Singular { omega });
    }
    let inv_s = ONE / schur;

    // M^-1 = [[D^-1 + y y^T / s, -y / s], [-y^T / s, 1 / s]]
    let mut minv = Matrix3::<Complex64>::zeros();
    for r in 0..2 {
        for c in 0..2 {
            minv[(r, c)] = y[r] * y[c] * inv_s;
        }
        minv[(r, r)] += ONE / d[r];
        minv[(r, 2)] = -y[r] * inv_s;
        minv[(2, r)] = -y[r] * inv_s;
    }
    minv[(2, 2)] = inv_s;

    let k = port_rates(resonators, mech);
    let mut s = SMatrix::identity();
    for r in 0..3 {
        for c in 0..3 {
            s[(r, c)] -= minv[(r, c)] * (k[r] * k[c]);
        }
    }
    Ok(s)
}

/// Dynamical matrix `M(omega)` of the converter as a dense matrix.
pub fn dynamical_matrix(
    resonators: &[ResonatorMode; 2],
    mech: &MechanicalMode,
    state: &ConverterState,
    omega: f64,
) -> DMatrix<Complex64> {
    let (d, z) = arrowhead(resonators, mech, state, omega);
    let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&d));
    for i in 0..2 {
        m[(i, 2)] = z[i];
        m[(2, i)] = z[i];
    }
    m
}

/// General input-output solve `S = I - K M^-1 K` for an arbitrary number of modes,
/// `port_rates` holding `sqrt(kappa_ex)` per mode. Uses an LU factorization.
pub fn dense_smatrix(
    dynamical: &DMatrix<Complex64>,
    port_rates: &[f64],
) -> Result<DMatrix<Complex64>> {
    let n = dynamical.nrows();
    if dynamical.ncols() != n || port_rates.len() != n {
        return Err(Error::invalid("dynamical matrix and port rates disagree in size"));
    }
    let k = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        port_rates.iter().map(|&r| Complex64::new(r, 0.0)),
    ));
    let x = dynamical
        .clone()
        .lu()
        .solve(&k)
        .ok_or(Error::Singular { omega: f64::NAN })?;
    Ok(DMatrix::identity(n, n) - &k * x)
}

/// Same as [`langevin_smatrix`] but through the dense LU path.
pub fn langevin_smatrix_dense(
    resonators: &[ResonatorMode; 2],
    mech: &MechanicalMode,
    state: &ConverterState,
    omega: f64,
) -> Result<SMatrix> {
    let m = dynamical_matrix(resonators, mech, state, omega);
    let s = dense_smatrix(&m, &port_rates(resonators, mech)).map_err(|e| match e {
        Error::Singular { .. } => Error::Singular { omega },
        other => other,
    })?;
    Ok(SMatrix::from_fn(|r, c| s[(r, c)]))
}

/// Converted signal `S21` against signal detuning `delta` [rad/s] from the
/// mechanical resonance (rotating frame `omega = omega_m + delta`).
///
/// The returned spectrum's grid is the detuning in Hz. Points are evaluated in
/// parallel; the output order always follows `detunings`.
pub fn conversion_spectrum(
    resonators: &[ResonatorMode; 2],
    mech: &MechanicalMode,
    state: &ConverterState,
    detunings: &[f64],
) -> Result<ComplexSpectrum> {
    let value = detunings
        .par_iter()
        .map(|&delta| {
            langevin_smatrix(resonators, mech, state, mech.omega_m + delta).map(|s| s[(1, 0)])
        })
        .collect::<Result<Vec<_>>>()?;
    let freq = detunings.iter().map(|&d| angular_to_hz(d)).collect();
    ComplexSpectrum::new(freq, value, Port::S21)
}
