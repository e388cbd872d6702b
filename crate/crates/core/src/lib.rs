//! Surrogate modelling toolkit for negatively buoyant inclined jets.
//!
//! The crate covers the whole pipeline: an integral jet model that generates
//! physically constrained datasets, multi-target regressors trained on those
//! datasets, evaluation protocols, and a Shapley-value explainer with an exact
//! enumeration oracle.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod explain;
pub mod jetmodel;
pub mod jetphys;
pub mod models;
pub mod reduced;
pub mod report;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use jetphys::{DerivedQuantities, JetCase, JetGeometry};
