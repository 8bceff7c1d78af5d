//! Single-resonator complex reflection fit.
//!
//! Fitted parameters (physical units): `omega_0` [rad/s], `kappa` [rad/s],
//! `kappa_ex` [rad/s], `phi` [rad, wrapped to (-pi, pi]], `tau` [s].
//! Derived: `eta`.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::lm::{minimize, Bound};
use super::{start_within, FitProblem, FitResult};
use crate::error::{Error, Result};
use crate::scattering::ComplexSpectrum;

pub const PARAMS: [&str; 5] = ["omega_0", "kappa", "kappa_ex", "phi", "tau"];

/// Heuristic starting point for a reflection fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceGuess {
    pub omega_0: f64,
    pub kappa: f64,
    pub kappa_ex: f64,
    /// Phase offset referred to `omega_0`, i.e. `phi + omega_0 tau`.
    pub phase_at_center: f64,
    pub tau: f64,
    /// Net phase winding across the resonance [rad].
    pub winding: f64,
}

fn moving_average(v: &[f64], half: usize) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half + 1).min(n);
            v[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Point-to-point noise estimate of a complex trace (per-point standard deviation).
pub(crate) fn noise_level(values: &[Complex64]) -> f64 {
    if values.len() < 3 {
        return 0.0;
    }
    // second differences cancel smooth structure; var(d2) = 6 sigma^2
    let d2: Vec<f64> = values
        .windows(3)
        .map(|w| (w[0] - 2.0 * w[1] + w[2]).norm())
        .collect();
    // median of a Rayleigh variable is sigma_d2 * sqrt(ln 4) / sqrt(2) per component
    median(d2) / (6f64.sqrt() * (2f64.ln()).sqrt())
}

/// Least-squares slope of `y` against `x`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

fn unwrap(phases: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for p in phases {
        match out.last() {
            None => out.push(p),
            Some(&prev) => {
                let mut d = p - prev;
                d -= TAU * (d / TAU).round();
                out.push(prev + d);
            }
        }
    }
    out
}

/// Net phase accumulated by the trace between two indices, delay not removed.
fn winding(values: &[Complex64], lo: usize, hi: usize) -> f64 {
    values[lo..=hi]
        .windows(2)
        .map(|w| (w[1] / w[0]).arg())
        .sum::<f64>()
        .abs()
}

/// Half-depth crossings of `depth` around `k`; `None` if the dip is not bracketed.
fn half_width(omega: &[f64], depth: &[f64], k: usize) -> Option<(f64, usize, usize)> {
    let half = depth[k] / 2.0;
    let left = (0..k).rev().find(|&j| depth[j] < half);
    let right = (k + 1..depth.len()).find(|&j| depth[j] < half);
    let interp = |a: usize, b: usize| {
        // linear interpolation of the crossing between a and b
        let (da, db) = (depth[a] - half, depth[b] - half);
        if da == db {
            omega[a]
        } else {
            omega[a] + (omega[b] - omega[a]) * da / (da - db)
        }
    };
    match (left, right) {
        (Some(l), Some(r)) => Some((interp(r, r - 1) - interp(l, l + 1), l, r)),
        _ => None,
    }
}

/// Locates the resonance in a reflection trace and estimates all five parameters.
///
/// Errors when no dip stands out of the noise or the dip is not bracketed by the
/// frequency window. When several dips qualify, the one with the larger phase
/// winding is taken.
pub fn estimate_resonance(spec: &ComplexSpectrum) -> Result<ResonanceGuess> {
    let n = spec.len();
    if n < 16 {
        return Err(Error::Initialization(format!(
            "need at least 16 points to locate a resonance, got {n}"
        )));
    }
    let omega: Vec<f64> = spec.omega().collect();
    let values = &spec.value;
    let power: Vec<f64> = values.iter().map(|v| v.norm_sqr()).collect();
    let edge = (n / 10).max(2);
    let baseline = median(
        power[..edge]
            .iter()
            .chain(&power[n - edge..])
            .copied()
            .collect(),
    );
    // power noise per point is about 2 sigma |S|; a boxcar of m points divides it by
    // sqrt(m). Widen the boxcar only until the dip is significant, since wider
    // smoothing broadens the apparent linewidth.
    let sigma = noise_level(values);
    let point_noise = 2.0 * sigma * baseline.sqrt().max(sigma);
    let mut smoothing: Option<(f64, Vec<f64>, Vec<f64>, f64)> = None;
    for half in [(n / 400).max(1), (n / 100).max(1), (n / 25).max(1)] {
        let smooth = moving_average(&power, half);
        let depth: Vec<f64> = smooth.iter().map(|p| (baseline - p).max(0.0)).collect();
        let max_depth = depth.iter().cloned().fold(0.0, f64::max);
        let noise = point_noise / ((2 * half + 1) as f64).sqrt();
        let significance = if noise > 0.0 { max_depth / noise } else { f64::INFINITY };
        if smoothing.as_ref().is_none_or(|s| significance > s.0) {
            smoothing = Some((significance, smooth, depth, max_depth));
        }
        if significance >= 6.0 {
            break;
        }
    }
    let (significance, smooth, depth, max_depth) = smoothing.expect("at least one width");
    if max_depth <= 0.0 || significance < 6.0 {
        return Err(Error::Initialization(
            "no resonance dip stands out of the noise in this window".into(),
        ));
    }

    let neighborhood = (n / 50).max(2);
    let mut candidates: Vec<usize> = (0..n)
        .filter(|&k| depth[k] >= 0.5 * max_depth)
        .filter(|&k| {
            let lo = k.saturating_sub(neighborhood);
            let hi = (k + neighborhood + 1).min(n);
            (lo..hi).all(|j| smooth[j] > smooth[k] || (smooth[j] == smooth[k] && j >= k))
        })
        .collect();
    if candidates.is_empty() {
        candidates.push(
            (0..n)
                .max_by(|&a, &b| depth[a].total_cmp(&depth[b]))
                .unwrap_or(0),
        );
    }

    let mut best: Option<(f64, usize, f64)> = None;
    for &k in &candidates {
        let Some((width, l, r)) = half_width(&omega, &depth, k) else {
            continue;
        };
        let span = (r - l).max(2) * 3;
        let lo = k.saturating_sub(span);
        let hi = (k + span).min(n - 1);
        let w = winding(values, lo, hi);
        if best.is_none_or(|(bw, _, _)| w > bw) {
            best = Some((w, k, width));
        }
    }
    let Some((wind, k, kappa)) = best else {
        return Err(Error::Initialization(
            "resonance is not bracketed by the frequency window".into(),
        ));
    };
    if k < n / 50 || k >= n - n / 50 {
        return Err(Error::Initialization(
            "resonance minimum lies at the edge of the window".into(),
        ));
    }
    let omega_0 = omega[k];

    // |S|^2 at line center is (1 - 2 eta)^2; the branch follows the winding
    let ratio = (power[k].min(smooth[k]) / baseline).clamp(0.0, 1.0).sqrt();
    let eta = if wind > PI {
        (1.0 + ratio) / 2.0
    } else {
        (1.0 - ratio) / 2.0
    }
    .clamp(0.02, 1.0);

    // delay from the phase slope of the two off-resonant edges, with the resonator's
    // own phase divided out
    let bare = |w: f64| Complex64::new(1.0, 0.0) - eta * kappa / Complex64::new(kappa / 2.0, omega_0 - w);
    let edge_slope = |range: std::ops::Range<usize>| {
        let x: Vec<f64> = range.clone().map(|j| omega[j] - omega_0).collect();
        let y = unwrap(range.map(|j| (values[j] / bare(omega[j])).arg()));
        slope(&x, &y)
    };
    let tau = (-0.5 * (edge_slope(0..edge) + edge_slope(n - edge..n))).max(0.0);

    // phase offset referred to omega_0: circular mean over the edges
    let (mut sx, mut sy) = (0.0, 0.0);
    for j in (0..edge).chain(n - edge..n) {
        let p = -(values[j] / bare(omega[j])).arg() - (omega[j] - omega_0) * tau;
        sx += p.cos();
        sy += p.sin();
    }

    Ok(ResonanceGuess {
        omega_0,
        kappa,
        kappa_ex: eta * kappa,
        phase_at_center: sy.atan2(sx),
        tau,
        winding: wind,
    })
}

fn wrap_phase(p: f64) -> f64 {
    let w = p - TAU * (p / TAU).round();
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Fits `exp(-i(phi + omega tau)) (1 - kappa_ex / (kappa/2 + i(omega_0 - omega)))` to
/// the stacked real and imaginary parts of the data.
pub fn fit_single_reflection(problem: &FitProblem<ComplexSpectrum>) -> Result<FitResult> {
    let spec = &problem.data;
    problem.check_weights(spec.len())?;

    let need_heuristics = PARAMS
        .iter()
        .any(|name| !problem.initial_guess.contains_key(*name));
    let guess = if need_heuristics {
        Some(estimate_resonance(spec)?)
    } else {
        None
    };
    let h = |name: &str, f: fn(&ResonanceGuess) -> f64| {
        problem.guess_or(name, guess.as_ref().map(f).unwrap_or(f64::NAN))
    };

    let bounds_phys = [
        problem.bound_or("omega_0", Bound::FREE),
        problem.bound_or("kappa", Bound::lower(0.0)),
        problem.bound_or("kappa_ex", Bound::lower(0.0)),
        problem.bound_or("phi", Bound::FREE),
        problem.bound_or("tau", Bound::lower(0.0)),
    ];
    let omega_0 = start_within(h("omega_0", |g| g.omega_0), bounds_phys[0]);
    let kappa = start_within(h("kappa", |g| g.kappa), bounds_phys[1]);
    let kappa_ex = start_within(h("kappa_ex", |g| g.kappa_ex), bounds_phys[2]);
    let tau = start_within(h("tau", |g| g.tau), bounds_phys[4]);
    let phase_center = match problem.initial_guess.get("phi") {
        Some(phi) => phi + omega_0 * tau,
        None => guess.map(|g| g.phase_at_center).unwrap_or(0.0),
    };
    if !(kappa > 0.0 && kappa.is_finite() && omega_0.is_finite()) {
        return Err(Error::Initialization("linewidth estimate is not positive".into()));
    }

    // scaled coordinates: frequencies relative to omega_ref in units of kappa_ref
    let omega_ref = omega_0;
    let kappa_ref = kappa;
    let x: Vec<f64> = spec.omega().map(|w| (w - omega_ref) / kappa_ref).collect();
    let start = [0.0, 1.0, kappa_ex / kappa_ref, phase_center, tau * kappa_ref];
    let bounds = [
        super::scaled_bound(bounds_phys[0], omega_ref, kappa_ref),
        super::scaled_bound(bounds_phys[1], 0.0, kappa_ref),
        super::scaled_bound(bounds_phys[2], 0.0, kappa_ref),
        bounds_phys[3],
        super::scaled_bound(bounds_phys[4], 0.0, 1.0 / kappa_ref),
    ];
    let start: Vec<f64> = start.iter().zip(&bounds).map(|(v, b)| b.clamp(*v)).collect();

    let data = &spec.value;
    let residual = |u: &[f64]| {
        let mut r = Vec::with_capacity(2 * x.len());
        for (k, &xk) in x.iter().enumerate() {
            let resp = Complex64::new(1.0, 0.0) - u[2] / Complex64::new(u[1] / 2.0, u[0] - xk);
            let model = Complex64::from_polar(1.0, -(u[3] + xk * u[4])) * resp;
            let d = (model - data[k]) * problem.weight(k);
            r.push(d.re);
            r.push(d.im);
        }
        r
    };
    let fit = minimize(residual, &start, &bounds, &problem.tolerances)?;

    // physical = offset + T u
    let mut t = DMatrix::zeros(5, 5);
    t[(0, 0)] = kappa_ref;
    t[(1, 1)] = kappa_ref;
    t[(2, 2)] = kappa_ref;
    t[(3, 3)] = 1.0;
    t[(3, 4)] = -omega_ref / kappa_ref;
    t[(4, 4)] = 1.0 / kappa_ref;
    let offset = [omega_ref, 0.0, 0.0, 0.0, 0.0];
    let mut out = into_linear(fit, &PARAMS, &offset, &t);
    out.values[3] = wrap_phase(out.values[3]);
    let eta = out.values[2] / out.values[1];
    out.derived.push(("eta".into(), eta));
    Ok(out)
}

/// Linear map of scaled parameters to physical ones with full covariance transform.
pub(crate) fn into_linear(
    mut fit: FitResult,
    names: &[&str],
    offset: &[f64],
    t: &DMatrix<f64>,
) -> FitResult {
    let u = nalgebra::DVector::from_column_slice(&fit.values);
    let p = t * u;
    fit.values = (0..names.len()).map(|i| offset[i] + p[i]).collect();
    fit.names = names.iter().map(|s| s.to_string()).collect();
    fit.covariance = t * &fit.covariance * t.transpose();
    fit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ResonatorMode;
    use crate::scattering::{s11_single, LineCalibration, Port};
    use crate::units::hz_to_angular;

    fn synth(res: &ResonatorMode, cal: &LineCalibration, n: usize, span: f64) -> ComplexSpectrum {
        let f0 = res.omega / TAU;
        let freq: Vec<f64> = (0..n)
            .map(|k| f0 - span / 2.0 + span * k as f64 / (n - 1) as f64)
            .collect();
        let value = freq.iter().map(|&f| s11_single(res, cal, hz_to_angular(f))).collect();
        ComplexSpectrum::new(freq, value, Port::S11).unwrap()
    }

    fn device_like(eta: f64) -> ResonatorMode {
        let omega = hz_to_angular(7.444e9);
        let kappa_in = omega / 2.2e5;
        let kappa = kappa_in / (1.0 - eta);
        ResonatorMode::new(omega, kappa_in, kappa - kappa_in).unwrap()
    }

    #[test]
    fn heuristics_land_near_truth() {
        let res = device_like(0.92);
        let cal = LineCalibration::new(0.7, 50e-9).unwrap();
        let spec = synth(&res, &cal, 2001, 10.0 * res.kappa() / TAU);
        let g = estimate_resonance(&spec).unwrap();
        assert!((g.omega_0 - res.omega).abs() < 0.01 * res.kappa());
        assert!((g.kappa / res.kappa() - 1.0).abs() < 0.05, "{g:?}");
        assert!((g.kappa_ex / res.kappa_ex - 1.0).abs() < 0.1, "{g:?}");
        assert!(g.winding > 1.5 * PI);
    }

    #[test]
    fn overcoupled_winds_full_circle() {
        let res = device_like(0.92);
        let spec = synth(&res, &LineCalibration::NONE, 4001, 200.0 * res.kappa() / TAU);
        let w = winding(&spec.value, 0, spec.len() - 1);
        assert!((w - TAU).abs() < 0.05, "{w}");
        let under = ResonatorMode::new(res.omega, 3.0 * res.kappa_ex, res.kappa_ex).unwrap();
        let spec = synth(&under, &LineCalibration::NONE, 4001, 200.0 * under.kappa() / TAU);
        assert!(winding(&spec.value, 0, spec.len() - 1) < 0.1);
    }

    #[test]
    fn exact_round_trip() {
        let res = device_like(0.92);
        let cal = LineCalibration::new(-2.1, 50e-9).unwrap();
        let spec = synth(&res, &cal, 801, 8.0 * res.kappa() / TAU);
        let fit = fit_single_reflection(&FitProblem::new(spec)).unwrap();
        assert!(fit.converged, "{:?}", fit.termination);
        let rel = |name: &str, truth: f64| (fit.get(name).unwrap() - truth).abs() / truth.abs();
        assert!(rel("omega_0", res.omega) < 1e-12);
        assert!(rel("kappa", res.kappa()) < 1e-6);
        assert!(rel("kappa_ex", res.kappa_ex) < 1e-6);
        assert!(rel("tau", 50e-9) < 1e-6);
        assert!((fit.get("phi").unwrap() - -2.1).abs() < 1e-6);
        assert!((fit.get("eta").unwrap() - 0.92).abs() < 1e-6);
    }

    #[test]
    fn undercoupled_round_trip() {
        let omega = hz_to_angular(9.308e9);
        let res = ResonatorMode::new(omega, hz_to_angular(300e3), hz_to_angular(120e3)).unwrap();
        let spec = synth(&res, &LineCalibration::new(0.2, 30e-9).unwrap(), 801, 4e6);
        let fit = fit_single_reflection(&FitProblem::new(spec)).unwrap();
        assert!((fit.get("kappa_ex").unwrap() / res.kappa_ex - 1.0).abs() < 1e-6);
        assert!((fit.get("kappa").unwrap() / res.kappa() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn flat_trace_is_rejected() {
        let freq: Vec<f64> = (0..200).map(|k| 7e9 + k as f64 * 1e3).collect();
        let value = vec![Complex64::new(1.0, 0.0); 200];
        let spec = ComplexSpectrum::new(freq, value, Port::S11).unwrap();
        assert!(matches!(
            fit_single_reflection(&FitProblem::new(spec)),
            Err(Error::Initialization(_))
        ));
    }

    #[test]
    fn resonance_outside_window_is_rejected() {
        let res = device_like(0.92);
        let f0 = res.omega / TAU;
        let k = res.kappa() / TAU;
        // window covers only the upper flank
        let freq: Vec<f64> = (0..400).map(|j| f0 + 0.3 * k + j as f64 * k / 100.0).collect();
        let value = freq
            .iter()
            .map(|&f| s11_single(&res, &LineCalibration::NONE, hz_to_angular(f)))
            .collect();
        let spec = ComplexSpectrum::new(freq, value, Port::S11).unwrap();
        assert!(matches!(
            estimate_resonance(&spec),
            Err(Error::Initialization(_))
        ));
    }

    #[test]
    fn two_dips_pick_larger_winding() {
        // overcoupled mode plus an equally deep undercoupled one in the same window
        let over = device_like(0.92);
        let k = over.kappa();
        // |1 - 2 eta| matches: eta = 0.04 gives the same depth as 0.96
        let under = ResonatorMode::from_linewidth(over.omega + 8.0 * k, k, 0.04).unwrap();
        let over = ResonatorMode::from_linewidth(over.omega, k, 0.96).unwrap();
        let f0 = over.omega / TAU;
        let freq: Vec<f64> = (0..3001).map(|j| f0 - 6.0 * k / TAU + j as f64 * 20.0 * k / TAU / 3000.0).collect();
        let value = freq
            .iter()
            .map(|&f| {
                let w = hz_to_angular(f);
                s11_single(&over, &LineCalibration::NONE, w) * s11_single(&under, &LineCalibration::NONE, w)
            })
            .collect();
        let spec = ComplexSpectrum::new(freq, value, Port::S11).unwrap();
        let g = estimate_resonance(&spec).unwrap();
        assert!((g.omega_0 - over.omega).abs() < 0.05 * k, "{g:?}");
    }

    #[test]
    fn wrap_phase_range() {
        for p in [-10.0, -PI, 0.0, PI, 7.0] {
            let w = wrap_phase(p);
            assert!(w > -PI && w <= PI);
            assert!(((w - p) / TAU - ((w - p) / TAU).round()).abs() < 1e-12);
        }
    }
}
