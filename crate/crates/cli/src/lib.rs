//! Command-line harness around [`ccs_ica`]: synthetic data generation,
//! mixing, separation, evaluation, divergence surfaces and Monte Carlo
//! benchmarks.

pub mod bench;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;

pub use bench::{BenchReport, BenchTable, Cell, CellSummary, ExperimentRecord};
pub use config::{Algorithm, ExperimentConfig};
pub use error::{CliError, CliResult};
