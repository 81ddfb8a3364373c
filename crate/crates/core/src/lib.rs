//! Forward model and data-analysis toolkit for sideband-resolved cavity
//! optomechanics with a parasitic back-reflection interferometer.
//!
//! The crate covers the analysis chain of a fiber-coupled optomechanical
//! crystal characterization:
//!
//! - [`model`]: physical parameter records (cavity, mechanical mode,
//!   interferometer, drive, environment), the optical susceptibility,
//!   intracavity photon number, thermal occupation, and propagation phases.
//! - [`sideband`]: steady-state intracavity field components at the carrier,
//!   calibration, and mechanical frequencies.
//! - [`interferometer`]: two-path beam-splitter output coefficients, beat
//!   notes, the mechanics/calibration power ratio `eta_g`, exact and expanded
//!   reflection lineshapes, Fano-parameter identification, and the measured-g0
//!   bias sweep.
//! - [`backaction`]: optical-spring frequency shift and optomechanical
//!   damping versus detuning.
//! - [`calibration`]: detector PSD synthesis and the calibration-tone g0
//!   estimator.
//! - [`fitting`]: Levenberg–Marquardt least squares plus the Fano,
//!   Lorentzian, and joint-backaction model fits.
//! - [`config`]: JSON experiment configuration with Hz-valued fields,
//!   converted to angular frequencies at the boundary.
//!
//! All frequencies inside the crate are angular (rad/s). User-facing I/O
//! (config files, CSV columns) uses ordinary frequency in Hz with the 2*pi
//! conversion applied exactly once, in [`config`] or at the CLI boundary.

pub mod backaction;
pub mod calibration;
pub mod config;
pub mod constants;
pub mod error;
pub mod fitting;
pub mod interferometer;
pub mod model;
pub mod sideband;

pub use error::{Error, Result};
pub use model::{Drive, Environment, Interferometer, MechanicalMode, OpticalCavity, PathIndex};
