//! Lorentzian fit of a real power spectrum.
//!
//! Model: `offset + peak / (1 + (2 (x - center) / fwhm)^2)`. Parameters come out in
//! the units of the data grid (Hz for [`PowerSpectrum`]).

use super::lm::{minimize, Bound};
use super::{scaled_bound, start_within, FitProblem, FitResult};
use crate::error::{Error, Result};
use crate::scattering::PowerSpectrum;

pub const PARAMS: [&str; 4] = ["center", "fwhm", "peak", "offset"];

#[inline]
pub fn lorentzian(x: f64, center: f64, fwhm: f64, peak: f64, offset: f64) -> f64 {
    let z = 2.0 * (x - center) / fwhm;
    offset + peak / (1.0 + z * z)
}

fn initial_estimate(x: &[f64], y: &[f64]) -> Result<[f64; 4]> {
    let n = x.len();
    if n < 5 {
        return Err(Error::Initialization(format!(
            "need at least 5 points for a Lorentzian fit, got {n}"
        )));
    }
    let offset = y[0].min(y[n - 1]);
    let k = (0..n).max_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap_or(0);
    let peak = y[k] - offset;
    if !(peak > 0.0) {
        return Err(Error::Initialization("spectrum has no peak above its edges".into()));
    }
    let half = offset + peak / 2.0;
    let left = (0..k).rev().find(|&j| y[j] < half);
    let right = (k + 1..n).find(|&j| y[j] < half);
    let cross = |a: usize, b: usize| x[a] + (x[b] - x[a]) * (y[a] - half) / (y[a] - y[b]);
    let fwhm = match (left, right) {
        (Some(l), Some(r)) => cross(r, r - 1) - cross(l, l + 1),
        (Some(l), None) => 2.0 * (x[k] - cross(l, l + 1)),
        (None, Some(r)) => 2.0 * (cross(r, r - 1) - x[k]),
        (None, None) => x[n - 1] - x[0],
    };
    Ok([x[k], fwhm.abs().max(f64::MIN_POSITIVE), peak, offset])
}

pub fn fit_lorentzian(problem: &FitProblem<PowerSpectrum>) -> Result<FitResult> {
    let x = &problem.data.detuning;
    let y = &problem.data.power;
    problem.check_weights(x.len())?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("power spectrum contains non-finite values"));
    }
    let est = if PARAMS.iter().all(|n| problem.initial_guess.contains_key(*n)) {
        [0.0; 4]
    } else {
        initial_estimate(x, y)?
    };
    let bounds_phys = [
        problem.bound_or("center", Bound::FREE),
        problem.bound_or("fwhm", Bound::lower(0.0)),
        problem.bound_or("peak", Bound::FREE),
        problem.bound_or("offset", Bound::FREE),
    ];
    let start_phys: Vec<f64> = PARAMS
        .iter()
        .enumerate()
        .map(|(i, name)| start_within(problem.guess_or(name, est[i]), bounds_phys[i]))
        .collect();
    let width_ref = start_phys[1];
    let height_ref = start_phys[2].abs().max(f64::MIN_POSITIVE);
    if !(width_ref > 0.0) {
        return Err(Error::Initialization("starting FWHM must be positive".into()));
    }
    let offset = [start_phys[0], 0.0, 0.0, 0.0];
    let scale = [width_ref, width_ref, height_ref, height_ref];
    let start: Vec<f64> = (0..4).map(|i| (start_phys[i] - offset[i]) / scale[i]).collect();
    let bounds: Vec<Bound> = (0..4)
        .map(|i| scaled_bound(bounds_phys[i], offset[i], scale[i]))
        .collect();
    let xs: Vec<f64> = x.iter().map(|v| (v - offset[0]) / width_ref).collect();
    let ys: Vec<f64> = y.iter().map(|v| v / height_ref).collect();

    let residual = |u: &[f64]| {
        xs.iter()
            .zip(&ys)
            .enumerate()
            .map(|(k, (&xk, &yk))| (lorentzian(xk, u[0], u[1], u[2], u[3]) - yk) * problem.weight(k))
            .collect::<Vec<_>>()
    };
    let fit = minimize(residual, &start, &bounds, &problem.tolerances)?;
    Ok(fit.into_physical(&PARAMS, &offset, &scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(c: f64, w: f64, p: f64, o: f64, n: usize, span: f64) -> PowerSpectrum {
        let x: Vec<f64> = (0..n).map(|k| c - span / 2.0 + span * k as f64 / (n - 1) as f64 + 0.37).collect();
        let y = x.iter().map(|&v| lorentzian(v, c, w, p, o)).collect();
        PowerSpectrum::new(x, y).unwrap()
    }

    #[test]
    fn exact_recovery() {
        for (c, w, p, o) in [(0.0, 1715.0, 0.608, 0.0), (120.0, 40.0, 2.0, 0.3), (-5e3, 9e3, 1e-3, 1e-5)] {
            let fit = fit_lorentzian(&FitProblem::new(sample(c, w, p, o, 401, 8.0 * w))).unwrap();
            assert!(fit.converged);
            let got = [0, 1, 2, 3].map(|i| fit.values[i]);
            let truth = [c, w, p, o];
            for i in 0..4 {
                let scale = if i == 0 { w } else if i == 3 { p } else { truth[i] };
                assert!((got[i] - truth[i]).abs() <= 1e-9 * scale.abs(), "{got:?} vs {truth:?}");
            }
        }
    }

    #[test]
    fn flat_input_fails_initialization() {
        let s = PowerSpectrum::new(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0], vec![1.0; 6]).unwrap();
        assert!(matches!(fit_lorentzian(&FitProblem::new(s)), Err(Error::Initialization(_))));
    }
}
