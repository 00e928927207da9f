//! Monte Carlo model of a temporally multiplexed heralded single-photon
//! source, with an exact analytic reference for the ideal case.
//!
//! The simulator draws photon pairs bin by bin, detects the signal photons
//! on a free-running herald detector, lets the controller route the idler
//! of the earliest heralded bin into the output window and counts clicks
//! of a gated idler detector. [`analytic`] computes the same per-cycle
//! probabilities exactly when dark counts and dead time are off.

pub mod analytic;
pub mod config;
pub mod controller;
pub mod detector;
pub mod error;
pub mod event;
pub mod experiment;
pub mod grid;
pub mod metrics;
pub mod optics;
pub mod report;
pub mod rng;
pub mod source;
pub mod tally;

pub use config::{parse_config, ExperimentConfig, RunMode};
pub use controller::ControllerMode;
pub use error::{Error, Result};
pub use experiment::{run_experiment, run_g2_experiment, run_sweep, simulate};
pub use metrics::{Estimate, MetricsReport};
pub use tally::Tally;
