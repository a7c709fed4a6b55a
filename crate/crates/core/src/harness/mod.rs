//! Experiment configuration, initial data, convergence studies and output.

pub mod config;
pub mod convergence;
pub mod experiment;
pub mod initial;
pub mod output;

pub use config::{ExperimentConfig, Mode};
pub use convergence::{
    coarsen, error_norms, fit_rate, log_slope, sample_at_centers, transfer, Comparison, ErrorNorms, ErrorRow, ErrorTable, Norm,
    Rate,
};
pub use experiment::{
    converge, dominant_mode, run_experiment, setup, simulate, Convergence, DominantMode, Outcome, RunStats, SimulateOptions,
    Trajectory,
};
pub use initial::{project_initial, InitialData, Profile, TrigFunction};
