//! Forward composition propagation (FCP) for feed-forward networks.
//!
//! [`fcp::explain`] attaches to every neuron a composition vector giving
//! each input feature's signed, L1-normalized share in that neuron for a
//! single instance. The remaining modules cover the surrounding workflow:
//! loading tabular data, training small classifiers, turning compositions
//! into feature attributions (with an LRP-ε baseline), and the fairness and
//! feature-flipping evaluations.

pub mod attribution;
pub mod cli;
pub mod dataprep;
pub mod error;
pub mod evaluation;
pub mod fcp;
pub mod io;
pub mod linalg;
pub mod network;
pub mod trainer;

pub use attribution::{FeatureAttribution, FeatureRanking};
pub use dataprep::Dataset;
pub use error::{Error, Result};
pub use fcp::{explain, CompositionTrace};
pub use linalg::{Matrix, Vector};
pub use network::{ActivationKind, Layer, Network};
pub use trainer::Hyperparams;
