//! Photon coincidence spectroscopy of a bichromatically driven
//! Jaynes-Cummings system.
//!
//! The crate solves the long-time limit of the driven, damped atom-cavity
//! master equation, evaluates normally ordered multi-photon count rates and
//! their background-subtracted spectra, and searches the detection window
//! that maximizes the peak-to-valley ratio of the two-photon spectrum.

pub mod cli;
pub mod correlations;
pub mod ensemble;
pub mod error;
pub mod floquet;
pub mod hilbert;
pub mod linalg;
pub mod liouville;
pub mod pvr;
pub mod quadrature;
pub mod spectral;

pub use error::{PcsError, Result};
pub use hilbert::{DressedLabel, SystemParams};
pub use liouville::{DriveField, TransitionMask};
