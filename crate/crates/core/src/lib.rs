//! Causal fairness auditing.

pub mod audit;
pub mod checks;
pub mod dataset;
pub mod dsl;
pub mod error;
pub mod estimators;
pub mod graph;
pub mod scenarios;
pub mod scm;

pub use error::{Error, Result};
