//! Gain normalization of measured reflections and transmissions.
//!
//! A raw reflection at port `i` carries the line gain `alpha_i beta_i`; a raw
//! transmission `i -> j` carries `alpha_i beta_j`. Dividing reflections by their
//! off-resonant level sets `alpha_i beta_i -> 1`, and the product of both off-resonant
//! reflections removes all four gains from the product of the two transmissions.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scattering::ComplexSpectrum;
use crate::units::db_to_linear;

/// Median `|S|^2` of the outer `edge_fraction` of points on each side.
pub fn off_resonant_level(spec: &ComplexSpectrum, edge_fraction: f64) -> Result<f64> {
    if !(edge_fraction > 0.0 && edge_fraction <= 0.5) {
        return Err(Error::invalid("edge fraction must be in (0, 0.5]"));
    }
    let n = spec.len();
    let k = ((n as f64 * edge_fraction).ceil() as usize).max(1).min(n);
    let mut edge: Vec<f64> = spec.value[..k]
        .iter()
        .chain(&spec.value[n - k..])
        .map(|v| v.norm_sqr())
        .collect();
    edge.sort_by(f64::total_cmp);
    let m = edge.len();
    let level = if m % 2 == 1 {
        edge[m / 2]
    } else {
        0.5 * (edge[m / 2 - 1] + edge[m / 2])
    };
    if !(level > 0.0 && level.is_finite()) {
        return Err(Error::invalid("off-resonant level must be positive"));
    }
    Ok(level)
}

/// Reflection divided by the amplitude of its power level `level`.
pub fn normalize_reflection(spec: &ComplexSpectrum, level: f64) -> Result<ComplexSpectrum> {
    if !(level > 0.0 && level.is_finite()) {
        return Err(Error::invalid("normalization level must be positive"));
    }
    let a = level.sqrt();
    ComplexSpectrum::new(
        spec.freq.clone(),
        spec.value.iter().map(|v| v / a).collect(),
        spec.port,
    )
}

/// Gain-free transmission `sqrt(P21 P12 / (R1 R2))` from raw transmitted powers and
/// raw off-resonant reflected powers.
pub fn calibrate_transmission(p21: f64, p12: f64, r1_off: f64, r2_off: f64) -> Result<f64> {
    if [p21, p12].iter().any(|p| !(*p >= 0.0)) || [r1_off, r2_off].iter().any(|r| !(*r > 0.0)) {
        return Err(Error::invalid(
            "transmitted powers must be >= 0 and reflection levels > 0",
        ));
    }
    Ok((p21 * p12 / (r1_off * r2_off)).sqrt())
}

/// Power gain `alpha_in beta_out` for a path with the given input loss and output
/// gain, both in dB; `alpha` is an attenuation.
pub fn path_gain(attenuation_db: f64, gain_db: f64) -> f64 {
    db_to_linear(gain_db - attenuation_db)
}

/// Applies a power gain to complex amplitudes.
pub fn apply_gain(values: &[Complex64], power_gain: f64) -> Vec<Complex64> {
    let a = power_gain.sqrt();
    values.iter().map(|v| v * a).collect()
}
