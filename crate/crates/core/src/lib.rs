//! Pedestrian trajectory prediction benchmark built around the constant
//! velocity model: ETH/UCY ingestion and windowing, the non-learned
//! baselines, learned regressors, leave-one-scene-out evaluation and the
//! diagnostic analyses.

pub mod analysis;
pub mod baselines;
pub mod data;
mod error;
pub mod evaluation;
pub mod features;
pub mod models;
pub mod results;
pub mod synthetic;
pub mod types;

pub use error::CoreError;
pub use types::*;
