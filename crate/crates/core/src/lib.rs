//! Surgical action-triplet recognition with temporal attention over causal
//! clips: data pipeline, model, objective, metrics and training harness.

pub mod datapipe;
pub mod error;
pub mod harness;
pub mod labels;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod table;
pub mod taxonomy;

pub use error::{Error, Result};
pub use labels::LabelVector;
pub use taxonomy::{Triplet, TripletTaxonomy};
