//! Consensus-based distributed quantile estimation over noisy sensor networks.
//!
//! Every node holds one scalar measurement and an estimate. By alternating a
//! local stochastic-approximation step with neighbor averaging, all estimates
//! converge to the sample quantile of the whole network's data using only
//! neighbor-to-neighbor communication.

pub mod apps;
pub mod eigen;
pub mod error;
pub mod estimator;
pub mod graph;
pub mod metrics;
pub mod noise;
pub mod quantile;
pub mod schedule;

pub use apps::{
    estimate_selection, flag_outliers, selection_to_p, trimmed_mean, AppContext, OutlierReport,
    SelectionKind, SelectionQuery, Tail, TrimSpec,
};
pub use error::{Error, Result};
pub use estimator::{averaging_step, averaging_step_with, innovation, local_update, EstimatorRun};
pub use graph::Network;
pub use metrics::{
    network_average, run_ensemble, run_single, squared_error, ConvergenceTrace, EnsembleReport,
    EnsembleSpec, MetricKind, RecordMode, RunSetup,
};
pub use noise::{realization_rng, LinkNoise, NoiseModel};
pub use quantile::{ecdf, quantile_oracle, validate_target, MeasurementSet, QuantileTarget};
pub use schedule::{ScheduleViolation, StepSchedule};
