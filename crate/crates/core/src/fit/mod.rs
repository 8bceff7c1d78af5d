//! Parameter extraction by nonlinear least squares.
//!
//! Every fitter works on internally rescaled parameters (offsets from the initial
//! guess measured in units of a characteristic width) so that the shared
//! Levenberg-Marquardt engine sees an O(1), well-conditioned problem. Results are
//! mapped back to physical units, covariance included.

mod eit;
mod lm;
mod lorentzian;
mod power_law;
mod reflection;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eit::{fit_two_mode_eit, EitData, EitWindow};
pub use lm::{minimize, numeric_jacobian, Bound};
pub use lorentzian::{fit_lorentzian, lorentzian};
pub use power_law::{fit_power_law, PowerLawData};
pub use reflection::{estimate_resonance, fit_single_reflection, ResonanceGuess};

/// Forward model identifiers understood by the fitters and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForwardModel {
    SingleReflection,
    TwoModeEit,
    Lorentzian,
    PowerLaw,
}

impl ForwardModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ForwardModel::SingleReflection => "single-reflection",
            ForwardModel::TwoModeEit => "two-mode-eit",
            ForwardModel::Lorentzian => "lorentzian",
            ForwardModel::PowerLaw => "power-law",
        }
    }
}

impl std::str::FromStr for ForwardModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-reflection" | "reflection" => Ok(ForwardModel::SingleReflection),
            "two-mode-eit" | "eit" => Ok(ForwardModel::TwoModeEit),
            "lorentzian" => Ok(ForwardModel::Lorentzian),
            "power-law" => Ok(ForwardModel::PowerLaw),
            other => Err(Error::invalid(format!("unknown forward model {other:?}"))),
        }
    }
}

/// Stopping controls for [`minimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Cosine between residual and any Jacobian column.
    pub gtol: f64,
    /// Relative step size.
    pub xtol: f64,
    /// Relative cost reduction.
    pub ftol: f64,
    /// Cap on attempted steps, accepted or not.
    pub max_iterations: usize,
    /// Starting Marquardt damping, relative to the diagonal of `J^T J`.
    pub initial_damping: f64,
    /// Relative step of the central-difference Jacobian.
    pub jacobian_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            gtol: 1e-10,
            xtol: 1e-10,
            ftol: 1e-10,
            max_iterations: 200,
            initial_damping: 1e-6,
            // cube root of machine epsilon balances truncation and rounding error
            jacobian_step: f64::EPSILON.cbrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Gradient,
    StepSize,
    CostChange,
    ZeroResidual,
    MaxIterations,
    NoProgress,
}

impl Termination {
    pub fn is_success(&self) -> bool {
        matches!(
            self,
            Termination::Gradient
                | Termination::StepSize
                | Termination::CostChange
                | Termination::ZeroResidual
        )
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// Parameter covariance, same order as `names`.
    pub covariance: DMatrix<f64>,
    /// Euclidean norm of the final (weighted) residual vector.
    pub residual_norm: f64,
    /// Accepted steps.
    pub iterations: usize,
    /// Residual evaluations, Jacobian columns included.
    pub evaluations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Parameters held at a bound at the solution.
    pub active: Vec<bool>,
    /// Quantities computed from the fitted parameters (e.g. `eta`, `C1`).
    pub derived: Vec<(String, f64)>,
    pub residuals: Vec<f64>,
}

impl FitResult {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Fitted or derived value by name.
    pub fn get(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.values[i]).or_else(|| {
            self.derived
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, v)| *v)
        })
    }

    /// One-sigma uncertainty from the covariance diagonal.
    pub fn stderr(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.covariance[(i, i)].max(0.0).sqrt())
    }

    pub fn is_active(&self, name: &str) -> bool {
        self.index(name).map(|i| self.active[i]).unwrap_or(false)
    }

    /// Renames parameters and maps them from scaled to physical units,
    /// `physical = offset + scale * scaled`.
    pub(crate) fn into_physical(mut self, names: &[&str], offset: &[f64], scale: &[f64]) -> Self {
        let n = self.values.len();
        debug_assert!(names.len() == n && offset.len() == n && scale.len() == n);
        self.names = names.iter().map(|s| s.to_string()).collect();
        for i in 0..n {
            self.values[i] = offset[i] + scale[i] * self.values[i];
        }
        self.covariance = DMatrix::from_fn(n, n, |r, c| self.covariance[(r, c)] * scale[r] * scale[c]);
        self
    }
}

/// A fit request: data plus optional named starting values, bounds and weights.
///
/// Parameters without an initial guess are initialized by the fitter's own
/// heuristics; parameters without bounds use the fitter's defaults.
#[derive(Debug, Clone)]
pub struct FitProblem<D> {
    pub data: D,
    pub initial_guess: BTreeMap<String, f64>,
    pub bounds: BTreeMap<String, Bound>,
    /// Per-point multipliers applied to the residuals (i.e. `1 / sigma_i`).
    pub weights: Option<Vec<f64>>,
    pub tolerances: Tolerances,
}

impl<D> FitProblem<D> {
    pub fn new(data: D) -> Self {
        Self {
            data,
            initial_guess: BTreeMap::new(),
            bounds: BTreeMap::new(),
            weights: None,
            tolerances: Tolerances::default(),
        }
    }

    pub fn with_guess(mut self, name: &str, value: f64) -> Self {
        self.initial_guess.insert(name.to_string(), value);
        self
    }

    pub fn with_bound(mut self, name: &str, bound: Bound) -> Self {
        self.bounds.insert(name.to_string(), bound);
        self
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    pub(crate) fn guess_or(&self, name: &str, fallback: f64) -> f64 {
        self.initial_guess.get(name).copied().unwrap_or(fallback)
    }

    pub(crate) fn bound_or(&self, name: &str, fallback: Bound) -> Bound {
        self.bounds.get(name).copied().unwrap_or(fallback)
    }

    pub(crate) fn check_weights(&self, n_points: usize) -> Result<()> {
        if let Some(w) = &self.weights {
            if w.len() != n_points {
                return Err(Error::invalid(format!(
                    "{} weights given for {} data points",
                    w.len(),
                    n_points
                )));
            }
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::invalid("weights must be finite and non-negative"));
            }
        }
        Ok(())
    }

    pub(crate) fn weight(&self, k: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[k])
    }
}

/// Maps a physical bound into scaled coordinates.
pub(crate) fn scaled_bound(b: Bound, offset: f64, scale: f64) -> Bound {
    Bound::new((b.lower - offset) / scale, (b.upper - offset) / scale)
}

/// Clamps a heuristic starting value into its bound before scaling.
pub(crate) fn start_within(value: f64, b: Bound) -> f64 {
    b.clamp(value)
}
