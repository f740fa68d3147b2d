//! Exo-SIR epidemic modelling: an SIR variant whose infected compartment is
//! split into endogenous (local) and exogenous (imported) infections.
//!
//! - [`ode`]: the deterministic model and a fixed-step RK4 integrator
//! - [`network`]: agent-based simulation on Barabási–Albert contact graphs
//! - [`sweep`]: Monte Carlo parameter sweep with a log-peak regression
//! - [`ingest`]: case-count CSV parsing into per-state daily series
//! - [`fit`]: rate estimation and the with/without exogenous counterfactual

pub mod fit;
pub mod ingest;
pub mod network;
pub mod ode;
pub mod ols;
pub mod sweep;

pub use fit::{Counterfactual, FittedParams, PeakComparison};
pub use ingest::{DailyCounts, ObservedSeries, StateRef};
pub use network::{ContactGraph, ExogenousChannel, NodeStatus};
pub use ode::{Compartment, CompartmentState, ModelParams, PeakStats, Trajectory};
pub use ols::RegressionReport;
pub use sweep::SweepSample;
