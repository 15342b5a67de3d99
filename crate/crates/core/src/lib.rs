pub mod classifier;
pub mod error;
pub mod quantum_math;
pub mod rng;
pub mod scheduling;
pub mod simulator;
pub mod topology;

pub use error::{Error, Result};
