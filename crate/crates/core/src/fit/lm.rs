//! Damped Gauss-Newton (Levenberg-Marquardt) with box constraints.
//!
//! Damping follows Marquardt's diagonal scaling with the gain-ratio update of
//! Madsen, Nielsen and Tingleff. Bounds are handled by projection: parameters
//! sitting on a bound whose gradient points outward are frozen for the step.

use nalgebra::{DMatrix, DVector};

use super::{FitResult, Termination, Tolerances};
use crate::error::{Error, Result};

/// Closed interval for one parameter. Infinite ends are allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub lower: f64,
    pub upper: f64,
}

impl Bound {
    pub const FREE: Bound = Bound {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn lower(lower: f64) -> Self {
        Self {
            lower,
            upper: f64::INFINITY,
        }
    }

    #[inline]
    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.lower).min(self.upper)
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }
}

impl Default for Bound {
    fn default() -> Self {
        Self::FREE
    }
}

/// Central-difference Jacobian of `f` at `x` (one-sided next to a bound).
///
/// `rel_step` scales the step `h_i = rel_step * max(|x_i|, 1)`.
pub fn numeric_jacobian<F>(f: &F, x: &[f64], bounds: &[Bound], rel_step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let mut probe = x.to_vec();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let h = rel_step * x[i].abs().max(1.0);
        let b = bounds.get(i).copied().unwrap_or(Bound::FREE);
        let (lo, hi) = match (x[i] - h >= b.lower, x[i] + h <= b.upper) {
            (true, true) => (x[i] - h, x[i] + h),
            (false, true) => (x[i], x[i] + h),
            (true, false) => (x[i] - h, x[i]),
            (false, false) => (x[i], x[i]),
        };
        if hi == lo {
            columns.push(vec![0.0; f(x).len()]);
            continue;
        }
        probe[i] = hi;
        let up = f(&probe);
        probe[i] = lo;
        let down = f(&probe);
        probe[i] = x[i];
        if up.len() != down.len() {
            return Err(Error::invalid("residual length changed between evaluations"));
        }
        let width = hi - lo;
        columns.push(up.iter().zip(&down).map(|(a, b)| (a - b) / width).collect());
    }
    let m = columns.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(m, n, |r, c| columns[c][r]))
}

fn cost_of(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

fn finite(r: &[f64]) -> bool {
    r.iter().all(|v| v.is_finite())
}

/// Minimizes `0.5 * |r(x)|^2` starting at `initial`.
///
/// `bounds` may be empty (unconstrained) or hold one entry per parameter.
/// Parameter names in the returned [`FitResult`] are `p0`, `p1`, ...
pub fn minimize<F>(residual: F, initial: &[f64], bounds: &[Bound], tol: &Tolerances) -> Result<FitResult>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = initial.len();
    if n == 0 {
        return Err(Error::invalid("no parameters to fit"));
    }
    if !bounds.is_empty() && bounds.len() != n {
        return Err(Error::invalid("bounds must match the number of parameters"));
    }
    let bounds: Vec<Bound> = if bounds.is_empty() {
        vec![Bound::FREE; n]
    } else {
        bounds.to_vec()
    };
    if let Some(i) = (0..n).find(|&i| !bounds[i].contains(initial[i])) {
        return Err(Error::invalid(format!(
            "initial value {} of parameter {i} lies outside its bounds",
            initial[i]
        )));
    }

    let mut x = initial.to_vec();
    let mut r = residual(&x);
    if r.is_empty() || !finite(&r) {
        return Err(Error::invalid("residual is empty or not finite at the initial guess"));
    }
    let m = r.len();
    let mut cost = cost_of(&r);
    let mut jac = numeric_jacobian(&residual, &x, &bounds, tol.jacobian_step)?;

    let mut lambda = tol.initial_damping;
    let mut nu = 2.0;
    let mut iterations = 0usize;
    let mut attempts = 0usize;
    let mut evaluations = 1 + 2 * n;
    let termination;
    let mut active = vec![false; n];
    // running maximum of the column norms, used as Marquardt scaling
    let mut scale = vec![0.0f64; n];

    loop {
        let rv = DVector::from_column_slice(&r);
        let grad = jac.tr_mul(&rv);
        let jtj = jac.tr_mul(&jac);
        for i in 0..n {
            scale[i] = scale[i].max(jtj[(i, i)]).max(f64::MIN_POSITIVE);
            let at_lower = x[i] <= bounds[i].lower && grad[i] > 0.0;
            let at_upper = x[i] >= bounds[i].upper && grad[i] < 0.0;
            active[i] = at_lower || at_upper;
        }

        if cost == 0.0 {
            termination = Termination::ZeroResidual;
            break;
        }
        let rnorm = rv.norm();
        let gnorm = (0..n)
            .filter(|&i| !active[i])
            .map(|i| {
                let cn = jac.column(i).norm();
                if cn == 0.0 {
                    0.0
                } else {
                    grad[i].abs() / (cn * rnorm)
                }
            })
            .fold(0.0, f64::max);
        if gnorm <= tol.gtol {
            termination = Termination::Gradient;
            break;
        }
        if attempts >= tol.max_iterations {
            termination = Termination::MaxIterations;
            break;
        }
        attempts += 1;

        let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
        let nf = free.len();
        let mut a = DMatrix::from_fn(nf, nf, |p, q| jtj[(free[p], free[q])]);
        for p in 0..nf {
            a[(p, p)] += lambda * scale[free[p]];
        }
        let rhs = DVector::from_fn(nf, |p, _| -grad[free[p]]);
        let Some(step) = a.clone().cholesky().map(|c| c.solve(&rhs)).or_else(|| a.lu().solve(&rhs))
        else {
            lambda *= nu;
            nu *= 2.0;
            continue;
        };

        let mut x_new = x.clone();
        for (p, &i) in free.iter().enumerate() {
            x_new[i] = bounds[i].clamp(x[i] + step[p]);
        }
        let h = DVector::from_fn(n, |i, _| x_new[i] - x[i]);
        let xnorm = DVector::from_column_slice(&x).norm();
        let small_step = h.norm() <= tol.xtol * (xnorm + tol.xtol);

        let r_new = residual(&x_new);
        evaluations += 1;
        let cost_new = if finite(&r_new) && r_new.len() == m {
            cost_of(&r_new)
        } else {
            f64::INFINITY
        };
        let predicted = -h.dot(&grad) - 0.5 * h.dot(&(&jtj * &h));
        let actual = cost - cost_new;
        let rho = if predicted > 0.0 { actual / predicted } else { -1.0 };

        if rho > 0.0 && actual > 0.0 {
            x = x_new;
            r = r_new;
            cost = cost_new;
            iterations += 1;
            jac = numeric_jacobian(&residual, &x, &bounds, tol.jacobian_step)?;
            evaluations += 2 * n;
            lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
            nu = 2.0;
            if small_step {
                termination = Termination::StepSize;
                break;
            }
            if actual <= tol.ftol * (cost + actual) && predicted <= tol.ftol * (cost + actual) {
                termination = Termination::CostChange;
                break;
            }
        } else if small_step {
            termination = Termination::StepSize;
            break;
        } else {
            lambda *= nu;
            nu *= 2.0;
            if !lambda.is_finite() || lambda > 1e30 {
                termination = Termination::NoProgress;
                break;
            }
        }
    }

    // covariance from the free block of J^T J, scaled by the residual variance
    let jtj = jac.tr_mul(&jac);
    let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
    let block = DMatrix::from_fn(free.len(), free.len(), |p, q| jtj[(free[p], free[q])]);
    let dof = m.saturating_sub(free.len());
    let variance = if dof > 0 { 2.0 * cost / dof as f64 } else { 0.0 };
    let inv = symmetric_pinv(&block);
    let mut covariance = DMatrix::zeros(n, n);
    for (p, &i) in free.iter().enumerate() {
        for (q, &j) in free.iter().enumerate() {
            covariance[(i, j)] = variance * inv[(p, q)];
        }
    }

    Ok(FitResult {
        names: (0..n).map(|i| format!("p{i}")).collect(),
        values: x,
        covariance,
        residual_norm: (2.0 * cost).sqrt(),
        iterations,
        evaluations,
        converged: termination.is_success(),
        termination,
        active,
        derived: Vec::new(),
        residuals: r,
    })
}

/// Pseudo-inverse of a symmetric positive semidefinite matrix via its eigen
/// decomposition; the result is symmetric PSD by construction.
pub(crate) fn symmetric_pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cutoff = max_ev * n as f64 * f64::EPSILON;
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let ev = eig.eigenvalues[k];
        if ev > cutoff {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / ev;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Vec<f64> {
        vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]
    }

    #[test]
    fn quadratic_bowl() {
        let target = [3.0, -2.0, 0.5];
        let f = |x: &[f64]| {
            vec![
                x[0] - target[0],
                10.0 * (x[1] - target[1]),
                0.3 * (x[2] - target[2]) + 0.1 * (x[0] - target[0]),
                x[1] - target[1],
            ]
        };
        let fit = minimize(f, &[0.0, 0.0, 0.0], &[], &Tolerances::default()).unwrap();
        assert!(fit.converged, "{:?}", fit.termination);
        assert!(fit.iterations <= 3, "{} iterations", fit.iterations);
        for i in 0..3 {
            assert!((fit.values[i] - target[i]).abs() < 1e-12, "{:?}", fit.values);
        }
    }

    #[test]
    fn rosenbrock_from_standard_start() {
        let fit = minimize(rosenbrock, &[-1.2, 1.0], &[], &Tolerances::default()).unwrap();
        assert!(fit.converged, "{:?}", fit.termination);
        assert!((fit.values[0] - 1.0).abs() < 1e-8 && (fit.values[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn pinned_parameter_is_active() {
        let f = |x: &[f64]| vec![x[0] - 3.0, x[1] + 1.0];
        let bounds = [Bound::new(-5.0, 1.0), Bound::FREE];
        let fit = minimize(f, &[0.0, 0.0], &bounds, &Tolerances::default()).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.values[0], 1.0);
        assert!((fit.values[1] + 1.0).abs() < 1e-10);
        assert_eq!(fit.active, vec![true, false]);
        assert_eq!(fit.covariance[(0, 0)], 0.0);
    }

    #[test]
    fn initial_outside_bounds_rejected() {
        let f = |x: &[f64]| vec![x[0]];
        assert!(minimize(f, &[2.0], &[Bound::new(0.0, 1.0)], &Tolerances::default()).is_err());
    }

    #[test]
    fn max_iterations_reported() {
        let tol = Tolerances {
            max_iterations: 2,
            ..Tolerances::default()
        };
        let fit = minimize(rosenbrock, &[-1.2, 1.0], &[], &tol).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.termination, Termination::MaxIterations);
    }

    #[test]
    fn nonfinite_start_rejected() {
        let f = |x: &[f64]| vec![x[0].ln()];
        assert!(minimize(f, &[-1.0], &[], &Tolerances::default()).is_err());
    }

    #[test]
    fn covariance_of_linear_regression() {
        // y = a + b t with known design: cov = s^2 (X^T X)^-1
        let t: Vec<f64> = (0..20).map(|k| k as f64 / 4.0).collect();
        let noise = [0.1, -0.2, 0.05, 0.0, 0.3, -0.1, 0.2, -0.3, 0.1, 0.0];
        let y: Vec<f64> = t.iter().enumerate().map(|(k, t)| 1.0 + 2.0 * t + noise[k % 10]).collect();
        let f = |p: &[f64]| t.iter().zip(&y).map(|(t, y)| p[0] + p[1] * t - y).collect::<Vec<_>>();
        let fit = minimize(f, &[0.0, 0.0], &[], &Tolerances::default()).unwrap();
        let x = DMatrix::from_fn(t.len(), 2, |r, c| if c == 0 { 1.0 } else { t[r] });
        let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
        let s2 = fit.residual_norm.powi(2) / (t.len() - 2) as f64;
        for i in 0..2 {
            for j in 0..2 {
                let expected = s2 * xtx_inv[(i, j)];
                assert!((fit.covariance[(i, j)] - expected).abs() < 1e-8 * expected.abs().max(1e-12));
            }
        }
    }
}
