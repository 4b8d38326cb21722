//! Experiment orchestration: configuration, the shared task loop, grids,
//! report files and plot data.

pub mod config;
pub mod experiment;
pub mod factory;
pub mod grid;
pub mod plot;
pub mod suite;

pub use config::{Benchmark, ExperimentConfig, GridSpec, MAPPER_NAMES};
pub use experiment::{run_experiment, ExperimentOutput};
pub use grid::{run_grid, GridOutput, GridRow};
pub use plot::emit_plots;
pub use suite::{pipeline_ledger, run_suite, CurvePoint, MemberResult, SuiteMember, SuiteOptions, SuiteOutput};
