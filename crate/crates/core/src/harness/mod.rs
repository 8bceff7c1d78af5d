//! Configuration, file I/O, synthetic data and the sweep experiments.

pub mod calibration;
pub mod config;
pub mod experiments;
pub mod io;
pub mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use config::{fink2018, DeviceConfig};
pub use experiments::{
    peak_transmission, run_bandwidth_sweep, run_cooling_curve, run_cooperativity_grid,
    run_dynamic_range, run_noise_budget, BandwidthRow, CoolingRow, DynamicRange, GridRow,
    GridSpec, NoiseRow,
};
pub use io::{Metadata, Table};
pub use synth::{synthesize_spectrum, NoiseSpec, SynthModel, Synthesized};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
    /// Uniform steps of a quantity already expressed in dB / dBm.
    Db,
}

/// One sweep axis. Exactly one of `points` or `step` is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default = "default_spacing")]
    pub spacing: Spacing,
}

fn default_spacing() -> Spacing {
    Spacing::Linear
}

impl Axis {
    pub fn with_points(name: &str, start: f64, stop: f64, points: usize, spacing: Spacing) -> Self {
        Self {
            name: name.into(),
            start,
            stop,
            points: Some(points),
            step: None,
            spacing,
        }
    }

    pub fn with_step(name: &str, start: f64, stop: f64, step: f64, spacing: Spacing) -> Self {
        Self {
            name: name.into(),
            start,
            stop,
            points: None,
            step: Some(step),
            spacing,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(Error::Config(format!("axis {}: range must be finite", self.name)));
        }
        if self.spacing == Spacing::Log && !(self.start > 0.0 && self.stop > 0.0) {
            return Err(Error::Config(format!(
                "axis {}: log spacing needs a positive range",
                self.name
            )));
        }
        match (self.points, self.step) {
            (Some(0), None) => Err(Error::Config(format!("axis {}: zero points", self.name))),
            (Some(_), None) => Ok(()),
            (None, Some(s)) if s > 0.0 && s.is_finite() => Ok(()),
            (None, Some(_)) => Err(Error::Config(format!("axis {}: step must be positive", self.name))),
            _ => Err(Error::Config(format!(
                "axis {}: give exactly one of points or step",
                self.name
            ))),
        }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let n = match (self.points, self.step) {
            (Some(n), _) => n,
            (None, Some(step)) => {
                let span = match self.spacing {
                    Spacing::Log => (self.stop / self.start).log10().abs(),
                    _ => (self.stop - self.start).abs(),
                };
                (span / step + 1e-9).floor() as usize + 1
            }
            _ => unreachable!(),
        };
        if n == 1 {
            return Ok(vec![self.start]);
        }
        let frac = |k: usize| k as f64 / (n - 1) as f64;
        Ok(match (self.spacing, self.step) {
            (Spacing::Log, Some(step)) => {
                let sign = if self.stop >= self.start { 1.0 } else { -1.0 };
                (0..n)
                    .map(|k| self.start * 10f64.powf(sign * step * k as f64))
                    .collect()
            }
            (Spacing::Log, None) => {
                let (a, b) = (self.start.ln(), self.stop.ln());
                (0..n).map(|k| (a + (b - a) * frac(k)).exp()).collect()
            }
            (_, Some(step)) => {
                let sign = if self.stop >= self.start { 1.0 } else { -1.0 };
                (0..n).map(|k| self.start + sign * step * k as f64).collect()
            }
            (_, None) => (0..n)
                .map(|k| self.start + (self.stop - self.start) * frac(k))
                .collect(),
        })
    }
}

/// Sweep request as stored in a config file's `[sweep]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default)]
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::Config("sweep needs at least one axis".into()));
        }
        self.axes.iter().try_for_each(Axis::validate)
    }

    pub fn axis(&self, name: &str) -> Option<&Axis> {
        self.axes.iter().find(|a| a.name.eq_ignore_ascii_case(name))
    }
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}
