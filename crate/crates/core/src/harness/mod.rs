//! Monte-Carlo experiment harness.

pub mod config;
pub mod metrics;
pub mod sweep;
pub mod trial;

pub use config::{Cell, CfoRangeMode, ExperimentConfig, Pulse};
pub use metrics::{ber, mse_cfo, resolve_ambiguity, Alignment};
pub use sweep::{sweep, CellSummary, SweepResult, TrialRecord};
pub use trial::{blind_receive, run_trial, run_trial_on, ReceiverOutput, TrialFlags, TrialResult};
