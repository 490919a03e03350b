//! Command-line driver: convergence study, single solve with field export,
//! benchmarks and partition reports.

pub mod commands;
pub mod config;
pub mod convergence;
pub mod vtk;

pub use commands::{run, Exit};
