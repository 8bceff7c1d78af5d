//! Forward model and parameter extraction for a two-resonator, one-mechanical-mode
//! electromechanical frequency converter.
//!
//! Two microwave resonators are each driven on their red sideband and coupled to a
//! single mechanical mode. In the linearized, rotating-wave picture this is a pair of
//! beam-splitter interactions through the mechanics, which converts photons between
//! the two resonator frequencies.
//!
//! The crate is split into:
//!
//! - [`model`]: device parameters and the drive-to-operating-point algebra
//!   (photon numbers, coupling rates, cooperativities).
//! - [`scattering`]: coherent response, both the 3-mode Langevin S-matrix and the
//!   closed-form reflection / transmission expressions.
//! - [`thermal`]: bath occupancy, sideband cooling with a resonator heating floor,
//!   and the converter's added output noise.
//! - [`fit`]: Levenberg-Marquardt engine and the inverse problems built on it.
//! - [`harness`]: configuration, CSV/JSON I/O, synthetic data, and the sweep drivers
//!   used by the `emconv` command-line tool.
//!
//! Internally every rate and frequency is angular (rad/s). Everything that crosses
//! a file or CLI boundary is in ordinary frequency (Hz).

// `!(x > 0.0)` is how NaN is rejected throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fit;
pub mod harness;
pub mod model;
pub mod scattering;
pub mod thermal;
pub mod units;

pub use error::{Error, Result};
pub use model::{
    ConverterState, DriveConfig, MechanicalMode, PhysicalConstants, ResonatorMode,
};
pub use scattering::{ComplexSpectrum, LineCalibration, Port, PowerSpectrum, SMatrix};
pub use thermal::{HeatingModel, NoiseBudget};

pub use num_complex::Complex64;
