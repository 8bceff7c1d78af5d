//! Power-law fit in log-log space: `y = amplitude * (x / reference_n)^exponent`.

use nalgebra::DMatrix;

use super::lm::{minimize, Bound};
use super::{FitProblem, FitResult};
use crate::error::{Error, Result};

pub const PARAMS: [&str; 2] = ["amplitude", "exponent"];

/// Positive samples, typically resonator occupancy against drive photon number.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Abscissa at which `amplitude` is reported.
    pub reference_n: f64,
}

impl PowerLawData {
    /// Uses the geometric mean of `x` as the reference point.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        check(&x, &y)?;
        let reference_n = (x.iter().map(|v| v.ln()).sum::<f64>() / x.len() as f64).exp();
        Ok(Self { x, y, reference_n })
    }

    pub fn with_reference(x: Vec<f64>, y: Vec<f64>, reference_n: f64) -> Result<Self> {
        check(&x, &y)?;
        if !(reference_n > 0.0 && reference_n.is_finite()) {
            return Err(Error::invalid("reference abscissa must be positive"));
        }
        Ok(Self { x, y, reference_n })
    }
}

fn check(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("power-law fit needs at least two (x, y) pairs"));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::invalid("power-law data must be strictly positive"));
    }
    Ok(())
}

pub fn fit_power_law(problem: &FitProblem<PowerLawData>) -> Result<FitResult> {
    let d = &problem.data;
    check(&d.x, &d.y)?;
    if !(d.reference_n > 0.0) {
        return Err(Error::invalid("reference abscissa must be positive"));
    }
    problem.check_weights(d.x.len())?;
    let lx: Vec<f64> = d.x.iter().map(|v| (v / d.reference_n).ln()).collect();
    let ly: Vec<f64> = d.y.iter().map(|v| v.ln()).collect();
    let mean_ly = ly.iter().sum::<f64>() / ly.len() as f64;
    let start = [
        problem.initial_guess.get("amplitude").map_or(mean_ly, |a| a.ln()),
        problem.guess_or("exponent", 0.0),
    ];
    let exp_bound = problem.bound_or("exponent", Bound::FREE);
    let amp_bound = problem.bound_or("amplitude", Bound::lower(0.0));
    let bounds = [
        Bound::new(
            if amp_bound.lower > 0.0 { amp_bound.lower.ln() } else { f64::NEG_INFINITY },
            amp_bound.upper.ln(),
        ),
        exp_bound,
    ];
    let residual = |u: &[f64]| {
        lx.iter()
            .zip(&ly)
            .enumerate()
            .map(|(k, (a, b))| (u[0] + u[1] * a - b) * problem.weight(k))
            .collect::<Vec<_>>()
    };
    let start = [bounds[0].clamp(start[0]), bounds[1].clamp(start[1])];
    let mut fit = minimize(residual, &start, &bounds, &problem.tolerances)?;
    // delta method for amplitude = exp(log_amplitude)
    let amplitude = fit.values[0].exp();
    let t = DMatrix::from_row_slice(2, 2, &[amplitude, 0.0, 0.0, 1.0]);
    fit.covariance = &t * &fit.covariance * t.transpose();
    fit.values[0] = amplitude;
    fit.names = PARAMS.iter().map(|s| s.to_string()).collect();
    fit.derived.push(("reference_n".into(), d.reference_n));
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_recovery() {
        let x: Vec<f64> = (0..12).map(|k| 1e3 * 1.6f64.powi(k)).collect();
        let y: Vec<f64> = x.iter().map(|v| 4.0 * (v / 3e4).powf(0.62)).collect();
        let d = PowerLawData::with_reference(x, y, 3e4).unwrap();
        let fit = fit_power_law(&FitProblem::new(d)).unwrap();
        assert!((fit.get("amplitude").unwrap() - 4.0).abs() < 1e-12);
        assert!((fit.get("exponent").unwrap() - 0.62).abs() < 1e-12);
    }

    #[test]
    fn flat_data_gives_mean() {
        let x = vec![1.0, 10.0, 100.0, 1000.0];
        let y = vec![2.5; 4];
        let fit = fit_power_law(&FitProblem::new(PowerLawData::new(x, y).unwrap())).unwrap();
        assert!((fit.get("amplitude").unwrap() - 2.5).abs() < 1e-12);
        assert!(fit.get("exponent").unwrap().abs() < 1e-12);
    }

    #[test]
    fn nonpositive_rejected() {
        assert!(PowerLawData::new(vec![1.0, 2.0], vec![1.0, 0.0]).is_err());
        assert!(PowerLawData::new(vec![-1.0, 2.0], vec![1.0, 1.0]).is_err());
        let bad = PowerLawData {
            x: vec![1.0, 2.0],
            y: vec![1.0, -3.0],
            reference_n: 1.0,
        };
        assert!(matches!(fit_power_law(&FitProblem::new(bad)), Err(Error::InvalidInput(_))));
    }
}
