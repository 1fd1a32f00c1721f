//! Experiment harness: configuration, Monte Carlo trials, sweeps, the frame
//! allocation report, the image round trip and result serialization.

pub mod allocation;
pub mod config;
pub mod image;
pub mod report;
pub mod sweep;
pub mod trial;

pub use config::ExperimentConfig;
pub use trial::{PointSummary, TrialContext, TrialRecord};
