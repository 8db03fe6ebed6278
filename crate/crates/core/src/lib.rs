//! Epistemic uncertainty of probabilistic classifiers, estimated as the
//! mutual information between a test label and the model parameters.
//!
//! The main estimator refits a model on bootstrap-reweighted copies of the
//! training data and measures the Jensen gap of the entropy over the
//! resulting prediction ensemble. The crate also carries the pieces needed
//! to check that estimator: a random-walk Metropolis posterior oracle, the
//! closed-form first-order expansion built from the Fisher information, an
//! exact split of ensemble MI into resampling and training-seed parts, and
//! an influence-function approximation of the bootstrap refits.

pub mod active;
pub mod asymptotic;
pub mod attribution;
pub mod bootstrap;
pub mod data;
pub mod error;
pub mod information;
mod linalg;
pub mod models;
pub mod posterior;
pub mod prob;
pub mod rng;
pub mod stats;

pub use data::LabeledDataset;
pub use error::{Error, Result};
pub use models::{ModelKind, ModelSpec, OptimizerKind, ParameterVector, TrainingConfig};
pub use prob::{PredictionMatrix, ProbabilityVector, EPS_CLIP};
pub use rng::RngStream;
