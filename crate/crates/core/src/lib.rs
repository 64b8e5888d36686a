//! Structured covariance estimation under rank, noise-power and
//! condition-number constraints, with constraint selection by expected
//! likelihood: pick the constraint whose estimate has a likelihood ratio
//! closest to the median ratio of the true covariance.

pub mod error;
pub mod estimators;
pub mod harness;
pub mod hermit;
pub mod likelihood;
pub mod rng;
pub mod scenario;
pub mod selection;

pub use error::{Error, Result};
