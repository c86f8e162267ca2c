//! Gaussian-process emulation with adaptive domain partitioning.
//!
//! The crate has three layers:
//!
//! * [`gp`] — stationary GP regression on `[0, 1]^d`: separable Matérn 5/2
//!   correlation, profiled (concentrated) likelihood, bounded Nelder–Mead
//!   hyperparameter search, and BLUP prediction with universal-kriging
//!   standard errors.
//! * [`design`] — space-filling designs: Latin hypercubes (optionally
//!   restricted to a sub-box) and Smolyak-style sparse grids built from
//!   nested one-dimensional component designs.
//! * [`ape`] — the adaptive partitioning emulator: grows a binary-split
//!   partition of the domain, keeps an independent local GP per region,
//!   and targets new design points at the region with the worst
//!   leave-one-out cross-validation error.
//!
//! [`testfns`] provides the benchmark functions the emulators are exercised
//! on and [`metrics`] the scaled accuracy measures used to compare them.

pub mod ape;
pub mod design;
pub mod error;
pub mod gp;
pub mod metrics;
pub mod seed;
pub mod testfns;

pub use error::{Error, Result};
