//! Deterministic few-photon linear-optics simulator.
//!
//! Evolves one- to four-photon Fock states through arbitrary passive mode
//! maps (lossy splitters included, via unitary dilation), models entangled
//! two-photon inputs with polarization and temporal structure, computes
//! thin-film stack responses, and composes everything into synthetic
//! coincidence-count experiments with shot noise and curve fitting.

pub mod error;
pub mod experiment;
pub mod fock;
pub mod optics;
pub mod optim;
pub mod rng;
pub mod states;
pub mod tmm;
pub mod transfer;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type Complex = num_complex::Complex64;
