//! Experiment plumbing around the `saddlepoint` solvers: JSON configs,
//! Matrix Market instances, CSV sweeps and validation reports.
//!
//! The `saddlepoint` binary wraps [`run`] with the subcommands `solve`,
//! `sweep`, `validate` and `bounds`.

pub mod config;
pub mod error;
pub mod mm;
pub mod run;

pub use config::{ExperimentConfig, InstanceConfig, ModeName, SolverChoice};
pub use error::{HarnessError, Result};
pub use run::{run_cell, run_solve, run_sweep, validate, SweepResult, SweepRow};
