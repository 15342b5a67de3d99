//! Feed-forward predictor of per-hop purification rounds.
//!
//! The model maps a directed hop (one-hot source and destination) plus a
//! fidelity to one of three classes, the number of purification rounds.
//! Training samples pair each hop with the fidelity actually reached after a
//! random number of rounds; at inference time the same input column carries
//! the fidelity the hop should reach.

mod dataset;
mod encoding;
mod network;
mod persist;
mod training;

pub use dataset::{generate_dataset, Dataset, TrainingSample, DEFAULT_SAMPLES_PER_HOP};
pub use encoding::{encode_hop, HopEncoding};
pub use network::{predict_rounds, ClassifierModel, DenseLayer, Features, Gradients, NUM_CLASSES};
pub use training::{accuracy, train, EpochReport, TrainingConfig, TrainingReport};
