//! Signaling-game agents, REINFORCE training and language analyses.

pub mod agents;
pub mod analysis;
pub mod env;
pub mod error;
pub mod fixtures;
pub mod metrics;
pub mod numerics;
pub mod stats;
pub mod training;
pub mod transmission;

pub use error::{Error, Result};
