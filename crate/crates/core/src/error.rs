use std::io;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A value fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A target fidelity cannot be reached by any single hop.
    #[error("infeasible target: required hop fidelity {required} exceeds 1")]
    InfeasibleTarget { required: f64 },

    /// Invalid construction parameters.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("no path between node {src} and node {dst}")]
    NoPath { src: usize, dst: usize },

    #[error("configuration error: {0}")]
    Config(String),

    /// The configured experiment cannot run, e.g. a service longer than a slot.
    #[error("infeasible experiment: {0}")]
    Infeasible(String),

    /// Latency requested for a request that did not succeed.
    #[error("latency undefined for request {0}: not successful")]
    UndefinedLatency(u64),

    #[error("training diverged: {0}")]
    Diverged(String),

    /// Malformed file contents.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
