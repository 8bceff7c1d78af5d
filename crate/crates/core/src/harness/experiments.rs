//! Sweep experiments: cooperativity grids, conversion bandwidth, noise budget,
//! sideband cooling and dynamic range.
//!
//! Grid points are evaluated in parallel; rows always come back in axis order.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;

use super::config::DeviceConfig;
use super::io::Table;
use super::linspace;
use crate::error::{Error, Result};
use crate::fit::{fit_lorentzian, FitProblem};
use crate::model::{ConverterState, MechanicalMode, ResonatorMode};
use crate::scattering::{
    conversion_efficiency, conversion_spectrum, langevin_smatrix, reflection_on_resonance,
};
use crate::thermal::{
    added_noise, cooled_occupancy, heating_occupancy, occupancy_temperature, HeatingModel,
};
use crate::units::angular_to_hz;

/// Relative tolerance on the fitted conversion bandwidth.
pub const BANDWIDTH_TOLERANCE: f64 = 0.01;

/// Default peak-search span in units of the damped mechanical linewidth.
pub const PEAK_SPAN: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// Outer product of cooperativity axes.
    Cooperativity { c1: Vec<f64>, c2: Vec<f64> },
    /// Outer product of applied drive powers [dBm].
    Power { p1: Vec<f64>, p2: Vec<f64> },
    /// Anti-diagonal `C1 C2 = product` at the given ratios `C1 / C2`.
    ConstantProduct { product: f64, ratios: Vec<f64> },
}

impl GridSpec {
    /// Drive-power grid in 2 dB steps, `P1` in [-14, 0] dBm and `P2` in [-10, 2] dBm.
    pub fn measured_powers() -> Self {
        GridSpec::Power {
            p1: linspace(-14.0, 0.0, 8),
            p2: linspace(-10.0, 2.0, 7),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            GridSpec::Cooperativity { c1, c2 } => c1.len() * c2.len(),
            GridSpec::Power { p1, p2 } => p1.len() * p2.len(),
            GridSpec::ConstantProduct { ratios, .. } => ratios.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRow {
    /// Applied drive powers [dBm], power grids only.
    pub power_dbm: Option<[f64; 2]>,
    pub c1: f64,
    pub c2: f64,
    pub s11: f64,
    pub s22: f64,
    pub transmission: f64,
}

fn grid_row(eta: [f64; 2], c1: f64, c2: f64, power_dbm: Option<[f64; 2]>) -> GridRow {
    GridRow {
        power_dbm,
        c1,
        c2,
        s11: reflection_on_resonance(c1, c2, eta[0]),
        s22: reflection_on_resonance(c2, c1, eta[1]),
        transmission: conversion_efficiency([c1, c2], eta),
    }
}

/// Closed-form line-center reflections and transmission over a grid.
pub fn run_cooperativity_grid(config: &DeviceConfig, grid: &GridSpec) -> Result<Vec<GridRow>> {
    config.validate()?;
    if grid.is_empty() {
        return Err(Error::Config("cooperativity grid is empty".into()));
    }
    let eta = config.eta()?;
    match grid {
        GridSpec::Cooperativity { c1, c2 } => {
            if c1.iter().chain(c2).any(|c| !(*c >= 0.0 && c.is_finite())) {
                return Err(Error::Config("grid cooperativities must be non-negative".into()));
            }
            Ok(outer(c1.len(), c2.len())
                .into_par_iter()
                .map(|(i, j)| grid_row(eta, c1[i], c2[j], None))
                .collect())
        }
        GridSpec::Power { p1, p2 } => outer(p1.len(), p2.len())
            .into_par_iter()
            .map(|(i, j)| {
                let st = config.with_powers(p1[i], p2[j]).state()?;
                Ok(grid_row(eta, st.coop[0], st.coop[1], Some([p1[i], p2[j]])))
            })
            .collect(),
        GridSpec::ConstantProduct { product, ratios } => {
            if !(*product >= 0.0 && product.is_finite()) || ratios.iter().any(|r| !(*r > 0.0)) {
                return Err(Error::Config(
                    "constant-product grid needs product >= 0 and positive ratios".into(),
                ));
            }
            Ok(ratios
                .par_iter()
                .map(|r| grid_row(eta, (product * r).sqrt(), (product / r).sqrt(), None))
                .collect())
        }
    }
}

fn outer(n1: usize, n2: usize) -> Vec<(usize, usize)> {
    (0..n1).flat_map(|i| (0..n2).map(move |j| (i, j))).collect()
}

pub fn grid_table(rows: &[GridRow]) -> Table {
    let with_power = rows.iter().any(|r| r.power_dbm.is_some());
    let mut cols = vec![];
    if with_power {
        cols.extend(["p1_dbm", "p2_dbm"]);
    }
    cols.extend(["c1", "c2", "s11_sq", "s22_sq", "t_sq"]);
    let mut t = Table::new(cols);
    for r in rows {
        let mut row = vec![];
        if with_power {
            let p = r.power_dbm.unwrap_or([f64::NAN; 2]);
            row.extend([p[0].into(), p[1].into()]);
        }
        row.extend([r.c1.into(), r.c2.into(), r.s11.into(), r.s22.into(), r.transmission.into()]);
        t.push(row);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthRow {
    pub coop: f64,
    /// Fitted full width at half maximum of `|S21|^2` [Hz].
    pub fwhm_hz: f64,
    /// Fitted Lorentzian peak height.
    pub peak: f64,
    /// `(1 + C1 + C2) gamma_m` [Hz].
    pub expected_fwhm_hz: f64,
    pub relative_error: f64,
    pub within_tolerance: bool,
    /// Fit failure message, if any.
    pub error: Option<String>,
}

/// Matched-cooperativity conversion bandwidth from a Lorentzian fit of `|S21|^2`.
pub fn run_bandwidth_sweep(config: &DeviceConfig, coops: &[f64]) -> Result<Vec<BandwidthRow>> {
    config.validate()?;
    let res = config.resonators()?;
    let mech = config.mechanics()?;
    let g0 = config.drives()?.map(|d| d.g0);
    coops
        .par_iter()
        .map(|&c| {
            let st = ConverterState::from_cooperativities(&res, &mech, [c, c], g0)?;
            let expected = angular_to_hz(st.total_linewidth);
            Ok(match bandwidth_fit(&res, &mech, &st) {
                Ok((fwhm, peak)) => {
                    let err = (fwhm / expected - 1.0).abs();
                    BandwidthRow {
                        coop: c,
                        fwhm_hz: fwhm,
                        peak,
                        expected_fwhm_hz: expected,
                        relative_error: err,
                        within_tolerance: err <= BANDWIDTH_TOLERANCE,
                        error: None,
                    }
                }
                Err(e) => BandwidthRow {
                    coop: c,
                    fwhm_hz: f64::NAN,
                    peak: f64::NAN,
                    expected_fwhm_hz: expected,
                    relative_error: f64::NAN,
                    within_tolerance: false,
                    error: Some(e.to_string()),
                },
            })
        })
        .collect()
}

fn bandwidth_fit(
    res: &[ResonatorMode; 2],
    mech: &MechanicalMode,
    st: &ConverterState,
) -> Result<(f64, f64)> {
    let half = 5.0 * st.total_linewidth;
    let spec = conversion_spectrum(res, mech, st, &linspace(-half, half, 1001))?;
    let fit = fit_lorentzian(&FitProblem::new(spec.to_power()))?;
    if !fit.converged {
        return Err(Error::Initialization(format!(
            "Lorentzian fit did not converge ({:?})",
            fit.termination
        )));
    }
    let get = |n: &str| fit.get(n).unwrap_or(f64::NAN);
    Ok((get("fwhm").abs(), get("peak")))
}

pub fn bandwidth_table(rows: &[BandwidthRow]) -> Table {
    let mut t = Table::new([
        "coop",
        "fwhm_hz",
        "peak",
        "expected_fwhm_hz",
        "relative_error",
        "within_tolerance",
        "error",
    ]);
    for r in rows {
        t.push(vec![
            r.coop.into(),
            r.fwhm_hz.into(),
            r.peak.into(),
            r.expected_fwhm_hz.into(),
            r.relative_error.into(),
            r.within_tolerance.into(),
            r.error.clone().unwrap_or_default().into(),
        ]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseRow {
    pub power_dbm: [f64; 2],
    pub n_drive: [f64; 2],
    pub coop: [f64; 2],
    pub n_res: [f64; 2],
    pub n_mech: f64,
    pub n_add: [f64; 2],
    /// Both cooperativities at or above the configured threshold.
    pub in_regime: bool,
}

fn heating_models(config: &DeviceConfig) -> Result<[HeatingModel; 2]> {
    match config.heating()? {
        [Some(a), Some(b)] => Ok([a, b]),
        _ => Err(Error::Config(
            "noise budget needs [heating1] and [heating2] sections".into(),
        )),
    }
}

fn resonator_occupancy(model: &HeatingModel, n_drive: f64) -> Result<f64> {
    if n_drive == 0.0 {
        Ok(0.0)
    } else {
        heating_occupancy(model, n_drive)
    }
}

/// Noise budget at an explicit operating point.
///
/// The mechanical occupancy is the larger of the two single-tone cooled values.
pub fn noise_budget_at(
    config: &DeviceConfig,
    state: &ConverterState,
    power_dbm: [f64; 2],
) -> Result<NoiseRow> {
    let heating = heating_models(config)?;
    let mech = config.mechanics()?;
    let eta = config.eta()?;
    let n_res = [
        resonator_occupancy(&heating[0], state.n_drive[0])?,
        resonator_occupancy(&heating[1], state.n_drive[1])?,
    ];
    let n_mech = (0..2)
        .map(|i| cooled_occupancy(mech.n_bath, state.coop[i], n_res[i]))
        .fold(f64::NEG_INFINITY, f64::max);
    let threshold = config.noise.cooperativity_threshold;
    Ok(NoiseRow {
        power_dbm,
        n_drive: state.n_drive,
        coop: state.coop,
        n_res,
        n_mech,
        n_add: added_noise(eta, n_res, n_mech),
        in_regime: state.coop.iter().all(|&c| c >= threshold),
    })
}

/// Noise budget chain `n_drive -> n_res -> n_m -> n_add` for each power pair [dBm].
pub fn run_noise_budget(config: &DeviceConfig, powers: &[[f64; 2]]) -> Result<Vec<NoiseRow>> {
    config.validate()?;
    heating_models(config)?;
    powers
        .par_iter()
        .map(|p| {
            let st = config.with_powers(p[0], p[1]).state()?;
            noise_budget_at(config, &st, *p)
        })
        .collect()
}

pub fn noise_table(rows: &[NoiseRow]) -> Table {
    let mut t = Table::new([
        "p1_dbm", "p2_dbm", "n_drive1", "n_drive2", "c1", "c2", "n_res1", "n_res2", "n_mech",
        "n_add1", "n_add2", "in_regime",
    ]);
    for r in rows {
        t.push(vec![
            r.power_dbm[0].into(),
            r.power_dbm[1].into(),
            r.n_drive[0].into(),
            r.n_drive[1].into(),
            r.coop[0].into(),
            r.coop[1].into(),
            r.n_res[0].into(),
            r.n_res[1].into(),
            r.n_mech.into(),
            r.n_add[0].into(),
            r.n_add[1].into(),
            r.in_regime.into(),
        ]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoolingRow {
    pub power_dbm: f64,
    pub n_drive: f64,
    pub coop: f64,
    pub n_res: f64,
    pub n_mech: f64,
    /// Mechanical mode temperature [K].
    pub t_mech: f64,
}

/// Single-tone sideband cooling through resonator `which` (0 or 1), the other drive off.
pub fn run_cooling_curve(
    config: &DeviceConfig,
    which: usize,
    powers_dbm: &[f64],
) -> Result<Vec<CoolingRow>> {
    config.validate()?;
    if which > 1 {
        return Err(Error::Config("cooling resonator index must be 1 or 2".into()));
    }
    let res = config.resonators()?;
    let mech = config.mechanics()?;
    let drive = config.drives()?[which];
    let heating = config.heating()?[which];
    powers_dbm
        .par_iter()
        .map(|&p| {
            let d = crate::model::DriveConfig { p_applied: p, ..drive };
            let delta = d.detuning(&res[which]);
            let n = crate::model::drive_photon_number(p, d.attenuation, d.omega_d, &res[which], delta)?;
            let g = crate::model::coupling_rate(d.g0, n)?;
            let coop = 4.0 * g * g / (res[which].kappa() * mech.gamma_m);
            let n_res = match &heating {
                Some(h) => resonator_occupancy(h, n)?,
                None => 0.0,
            };
            let n_mech = cooled_occupancy(mech.n_bath, coop, n_res);
            Ok(CoolingRow {
                power_dbm: p,
                n_drive: n,
                coop,
                n_res,
                n_mech,
                t_mech: occupancy_temperature(mech.omega_m, n_mech),
            })
        })
        .collect()
}

pub fn cooling_table(rows: &[CoolingRow]) -> Table {
    let mut t = Table::new(["power_dbm", "n_drive", "coop", "n_res", "n_mech", "t_mech_k"]);
    for r in rows {
        t.push(vec![
            r.power_dbm.into(),
            r.n_drive.into(),
            r.coop.into(),
            r.n_res.into(),
            r.n_mech.into(),
            r.t_mech.into(),
        ]);
    }
    t
}

/// Maximum of `|S21|^2` over a detuning span of `span` damped linewidths centered
/// on the mechanical resonance.
pub fn peak_transmission(
    resonators: &[ResonatorMode; 2],
    mech: &MechanicalMode,
    state: &ConverterState,
    span: f64,
) -> Result<f64> {
    if !(span > 0.0 && span.is_finite()) {
        return Err(Error::invalid("peak-search span must be positive"));
    }
    let t = |delta: f64| -> Result<f64> {
        Ok(langevin_smatrix(resonators, mech, state, mech.omega_m + delta)?[(1, 0)].norm_sqr())
    };
    let half = 0.5 * span * state.total_linewidth;
    let n = 201;
    let grid = linspace(-half, half, n);
    let vals = grid.iter().map(|&d| t(d)).collect::<Result<Vec<_>>>()?;
    let k = (0..n).max_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    // golden-section refinement on the bracketing cell pair
    let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(n - 1)]);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - r * (b - a), a + r * (b - a));
    let (mut f1, mut f2) = (t(x1)?, t(x2)?);
    for _ in 0..80 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = t(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = t(x1)?;
        }
    }
    Ok(vals[k].max(f1).max(f2))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicRange {
    /// `(signal photon flux [1/s], |T|^2)`.
    pub rows: Vec<(f64, f64)>,
    /// Peak transmission of the configured operating point.
    pub efficiency: f64,
    /// Closed-form efficiency at the lower and upper waveguide coupling bounds.
    pub band: [f64; 2],
    pub coop: [f64; 2],
    pub notes: Vec<String>,
}

/// Transmission against signal photon flux in the linear model, with the
/// expected-efficiency band from the configured coupling-ratio bounds.
pub fn run_dynamic_range(config: &DeviceConfig, fluxes: &[f64]) -> Result<DynamicRange> {
    config.validate()?;
    let res = config.resonators()?;
    let mech = config.mechanics()?;
    let st = config.state()?;
    let efficiency = peak_transmission(&res, &mech, &st, PEAK_SPAN)?;
    let b = &config.eta_band;
    let band = [
        conversion_efficiency(st.coop, [b.eta1[0], b.eta2[0]]),
        conversion_efficiency(st.coop, [b.eta1[1], b.eta2[1]]),
    ];
    if fluxes.iter().any(|f| !(*f >= 0.0 && f.is_finite())) {
        return Err(Error::invalid("signal photon flux must be non-negative"));
    }
    Ok(DynamicRange {
        rows: fluxes.iter().map(|&f| (f, efficiency)).collect(),
        efficiency,
        band,
        coop: st.coop,
        notes: vec!["linear model: signal compression is not modeled".into()],
    })
}

pub fn dynamic_range_table(dr: &DynamicRange) -> Table {
    let mut t = Table::new(["flux_per_s", "t_sq", "band_low", "band_high"]);
    for &(f, v) in &dr.rows {
        t.push(vec![f.into(), v.into(), dr.band[0].into(), dr.band[1].into()]);
    }
    t
}

/// Conversion bandwidth in Hz for matched cooperativity `c`, `(1 + 2C) gamma_m`.
pub fn matched_bandwidth_hz(mech: &MechanicalMode, c: f64) -> f64 {
    (1.0 + 2.0 * c) * mech.gamma_m / TAU
}
