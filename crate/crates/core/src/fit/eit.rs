//! Joint two-window EIT fit for the parametric couplings and mechanical parameters.
//!
//! Resonator parameters and line calibrations are held at values obtained from a
//! prior single-reflection fit. Fitted: `g1`, `g2`, `gamma_m`, `omega_m` (all
//! [rad/s]). Derived: `C1`, `C2` (`4 g_i^2 / (kappa_i gamma_m)`) and
//! `total_linewidth`.

use num_complex::Complex64;

use super::lm::{minimize, Bound};
use super::reflection::noise_level;
use super::{scaled_bound, start_within, FitProblem, FitResult};
use crate::error::{Error, Result};
use crate::model::{ConverterState, MechanicalMode, ResonatorMode};
use crate::scattering::{eit_reflection, ComplexSpectrum, LineCalibration};

pub const PARAMS: [&str; 4] = ["g1", "g2", "gamma_m", "omega_m"];

/// One measurement window around resonator `i`, with the drive tone on it.
#[derive(Debug, Clone)]
pub struct EitWindow {
    /// Lab-frame reflection data [Hz grid].
    pub spectrum: ComplexSpectrum,
    /// Drive frequency of this resonator [rad/s].
    pub drive_omega: f64,
    /// Line calibration at lab frequency for this window.
    pub calibration: LineCalibration,
}

#[derive(Debug, Clone)]
pub struct EitData {
    pub resonators: [ResonatorMode; 2],
    pub windows: [EitWindow; 2],
}

struct Prepared {
    /// Rotating-frame frequencies per window.
    omega: [Vec<f64>; 2],
    /// Data with the line calibration divided out.
    data: [Vec<Complex64>; 2],
    detuning: [f64; 2],
}

fn prepare(d: &EitData) -> Result<Prepared> {
    let mut omega: [Vec<f64>; 2] = Default::default();
    let mut data: [Vec<Complex64>; 2] = Default::default();
    let mut detuning = [0.0; 2];
    for i in 0..2 {
        d.resonators[i].validate()?;
        let w = &d.windows[i];
        if !(w.drive_omega > 0.0) {
            return Err(Error::invalid("drive frequency must be positive"));
        }
        detuning[i] = d.resonators[i].omega - w.drive_omega;
        for (lab, v) in w.spectrum.omega().zip(&w.spectrum.value) {
            omega[i].push(lab - w.drive_omega);
            data[i].push(v / w.calibration.factor(lab));
        }
    }
    Ok(Prepared {
        omega,
        data,
        detuning,
    })
}

/// Starting values `[g1, g2, gamma_m, omega_m]` read off the mechanical feature:
/// its center and width, and the line-center reflection of both windows.
fn initial_estimate(d: &EitData, p: &Prepared) -> Result<[f64; 4]> {
    let res = &d.resonators;
    let chi = |i: usize, w: f64| {
        Complex64::new(1.0, 0.0) / Complex64::new(res[i].kappa() / 2.0, p.detuning[i] - w)
    };
    let bare = |i: usize, w: f64| Complex64::new(1.0, 0.0) - res[i].kappa_ex * chi(i, w);

    // deviation from the bare resonator response
    let dev: [Vec<f64>; 2] = [0, 1].map(|i| {
        p.omega[i]
            .iter()
            .zip(&p.data[i])
            .map(|(&w, v)| (v - bare(i, w)).norm_sqr())
            .collect()
    });
    let sigma = [0, 1].map(|i| noise_level(&p.data[i]));
    let peak = [0, 1].map(|i| dev[i].iter().cloned().fold(0.0, f64::max));
    let visible = [0, 1].map(|i| peak[i].sqrt() > 5.0 * sigma[i] + 1e-9);
    if !visible[0] && !visible[1] {
        return Err(Error::Unidentifiable(
            "no mechanical feature in either window; g1 = g2 = 0 leaves gamma_m and omega_m \
             undetermined"
                .into(),
        ));
    }
    let r = if peak[0] / (sigma[0] * sigma[0] + 1e-300) >= peak[1] / (sigma[1] * sigma[1] + 1e-300) {
        0
    } else {
        1
    };
    let w = &p.omega[r];
    let e = &dev[r];
    let n = w.len();
    let k = (0..n).max_by(|&a, &b| e[a].total_cmp(&e[b])).unwrap_or(0);

    // parabolic refinement of the peak position
    let omega_m = if k > 0 && k + 1 < n {
        let (a, b, c) = (e[k - 1], e[k], e[k + 1]);
        let denom = a - 2.0 * b + c;
        let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        w[k] + shift.clamp(-1.0, 1.0) * 0.5 * (w[k + 1] - w[k - 1])
    } else {
        w[k]
    };

    let half = e[k] / 2.0;
    let left = (0..k).rev().find(|&j| e[j] < half).map(|j| w[j]);
    let right = (k + 1..n).find(|&j| e[j] < half).map(|j| w[j]);
    let linewidth = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (w[k] - l),
        (None, Some(r)) => 2.0 * (r - w[k]),
        (None, None) => {
            return Err(Error::Initialization(
                "mechanical feature is wider than the measurement window".into(),
            ))
        }
    };
    if !(linewidth > 0.0) {
        return Err(Error::Initialization("could not resolve the mechanical linewidth".into()));
    }

    // line-center reflection, averaged over a fraction of the linewidth
    let center = |i: usize| -> Complex64 {
        let pts: Vec<Complex64> = p.omega[i]
            .iter()
            .zip(&p.data[i])
            .filter(|(&x, _)| (x - omega_m).abs() <= linewidth / 8.0)
            .map(|(_, v)| *v)
            .collect();
        if pts.is_empty() {
            let j = p.omega[i]
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - omega_m).abs().total_cmp(&(b.1 - omega_m).abs()))
                .map(|(j, _)| j)
                .unwrap_or(0);
            p.data[i][j]
        } else {
            pts.iter().sum::<Complex64>() / pts.len() as f64
        }
    };
    // (1 - S_ii) / (kappa_ex chi_i) = (1 + c_j) / (1 + c_1 + c_2)
    let a = [0, 1].map(|i| (Complex64::new(1.0, 0.0) - center(i)) / (res[i].kappa_ex * chi(i, omega_m)));
    let inv_d = a[0] + a[1] - 1.0;
    let d_total = Complex64::new(1.0, 0.0) / inv_d;
    let c = [a[1] * d_total - 1.0, a[0] * d_total - 1.0];
    let coop = [0, 1].map(|i| {
        let v = (2.0 * c[i] / (chi(i, omega_m) * res[i].kappa())).re;
        if v.is_finite() {
            v.max(0.0)
        } else {
            0.0
        }
    });
    let gamma_m = linewidth / (1.0 + coop[0] + coop[1]);
    let g = [0, 1].map(|i| (coop[i] * res[i].kappa() * gamma_m / 4.0).sqrt());
    Ok([g[0], g[1], gamma_m, omega_m])
}

/// Fits both EIT windows jointly against the two-mode reflection model.
pub fn fit_two_mode_eit(problem: &FitProblem<EitData>) -> Result<FitResult> {
    let d = &problem.data;
    let p = prepare(d)?;
    let n_points = p.omega[0].len() + p.omega[1].len();
    problem.check_weights(n_points)?;

    let est = if PARAMS.iter().all(|n| problem.initial_guess.contains_key(*n)) {
        [f64::NAN; 4]
    } else {
        initial_estimate(d, &p)?
    };
    let bounds_phys = [
        problem.bound_or("g1", Bound::lower(0.0)),
        problem.bound_or("g2", Bound::lower(0.0)),
        problem.bound_or("gamma_m", Bound::lower(0.0)),
        problem.bound_or("omega_m", Bound::lower(0.0)),
    ];
    let start_phys: Vec<f64> = PARAMS
        .iter()
        .enumerate()
        .map(|(i, name)| start_within(problem.guess_or(name, est[i]), bounds_phys[i]))
        .collect();
    if start_phys.iter().any(|v| !v.is_finite()) || !(start_phys[2] > 0.0) {
        return Err(Error::Initialization("invalid starting point for the EIT fit".into()));
    }

    let gamma_ref = start_phys[2];
    let coop_start = [0, 1].map(|i| 4.0 * start_phys[i].powi(2) / (d.resonators[i].kappa() * gamma_ref));
    let linewidth_ref = gamma_ref * (1.0 + coop_start[0] + coop_start[1]);
    let g_scale = [0, 1].map(|i| {
        (coop_start[i].max(1.0) * d.resonators[i].kappa() * gamma_ref / 4.0).sqrt()
    });
    let offset = [0.0, 0.0, 0.0, start_phys[3]];
    let scale = [g_scale[0], g_scale[1], gamma_ref, linewidth_ref];
    let start: Vec<f64> = (0..4).map(|i| (start_phys[i] - offset[i]) / scale[i]).collect();
    let bounds: Vec<Bound> = (0..4)
        .map(|i| scaled_bound(bounds_phys[i], offset[i], scale[i]))
        .collect();

    let residual = |u: &[f64]| {
        let mech = MechanicalMode {
            omega_m: offset[3] + scale[3] * u[3],
            gamma_m: scale[2] * u[2],
            n_bath: 0.0,
        };
        let state = ConverterState {
            n_drive: [0.0; 2],
            g: [scale[0] * u[0], scale[1] * u[1]],
            big_gamma: [0.0; 2],
            coop: [0.0; 2],
            total_linewidth: 0.0,
            detuning: p.detuning,
        };
        let mut r = Vec::with_capacity(2 * n_points);
        let mut k = 0;
        for i in 0..2 {
            for (&w, v) in p.omega[i].iter().zip(&p.data[i]) {
                let diff = (eit_reflection(&d.resonators, &mech, &state, i, w) - v) * problem.weight(k);
                r.push(diff.re);
                r.push(diff.im);
                k += 1;
            }
        }
        r
    };
    let fit = minimize(residual, &start, &bounds, &problem.tolerances)?;
    let mut out = fit.into_physical(&PARAMS, &offset, &scale);

    let (g1, g2, gamma_m) = (out.values[0], out.values[1], out.values[2]);
    if g1 == 0.0 && g2 == 0.0 {
        return Err(Error::Unidentifiable(
            "fit collapsed to g1 = g2 = 0; mechanical parameters are undetermined".into(),
        ));
    }
    let c1 = 4.0 * g1 * g1 / (d.resonators[0].kappa() * gamma_m);
    let c2 = 4.0 * g2 * g2 / (d.resonators[1].kappa() * gamma_m);
    out.derived.push(("C1".into(), c1));
    out.derived.push(("C2".into(), c2));
    out.derived.push(("total_linewidth".into(), gamma_m * (1.0 + c1 + c2)));
    Ok(out)
}
