//! Numerical model of a frequency-modulated laser beamline driven through an
//! acousto-optic modulator.
//!
//! The AOM writes an FM sideband comb onto the beam and deflects every
//! sideband by a slightly different angle. After a lens the sidebands are
//! laterally displaced copies of one Gaussian mode, so any aperture that
//! clips them unevenly turns FM into amplitude modulation. A narrow-band
//! integrator acting on the RF drive can cancel the AM seen by one detector;
//! whether that also cancels the AM seen by a second detector depends on
//! whether the two detectors see the same spatial mode. A single-mode fiber
//! after the AOM forces exactly that.
//!
//! Layout:
//! - [`beamline`]: optical state and element transforms.
//! - [`detection`]: aperture overlaps, photocurrent harmonics, time series.
//! - [`control`]: I/Q demodulation, integrator, closed-loop runner.
//! - [`spectra`]: Welch PSD at a requested resolution bandwidth.
//! - [`scenario`]: the text configuration format.
//! - [`commands`]: the CLI subcommands as library functions.

// `!(x > 0.0)` style checks deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamline;
pub mod commands;
pub mod control;
pub mod detection;
pub mod error;
pub mod scenario;
pub mod selftest;
pub mod spectra;

pub use error::{ConfigError, Error, Result};
pub use num_complex::Complex64;
