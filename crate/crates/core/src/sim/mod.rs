//! Simulation designs, data generation and Monte Carlo summaries.

mod design;
mod dgp;
mod mc;
mod metrics;

pub use design::{Estimator, GroupParams, SimDesign, PRESETS};
pub use dgp::{generate_dataset, generate_with_rng, sim_schema, Group, SimSample};
pub use mc::{fit_replicate, run_mc, run_mc_with, sweep, sweep_csv, McResult, ReplicateRecord, SweepAxis, SweepRow};
pub use metrics::{coverage_warp_speed, summarize, MetricsReport, ParameterMetrics};
