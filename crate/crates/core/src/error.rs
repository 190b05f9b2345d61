//! Error type shared by all modules.

use thiserror::Error;

/// Errors reported by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// Request exceeds the supported photon number or mode count.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Model input violates a physical constraint (gain, broken normalization, ...).
    #[error("unphysical model: {0}")]
    Unphysical(String),

    /// Malformed configuration, file, or argument.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A curve fit failed to converge after all restarts.
    #[error("fit did not converge: {0}")]
    FitFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
