//! Command-line front end for the homogenization library: single runs,
//! convergence sweeps, cost tables, CSV records and SVG plots.

pub mod app;
pub mod bench;
pub mod config;
pub mod error;
pub mod fit;
pub mod plot;
pub mod record;
pub mod sweep;

pub use config::{CoefSpec, ReferencePolicy, Settings, SweepConfig};
pub use error::{CliError, Result};
pub use record::{SweepRecord, HEADER};
pub use sweep::{run_sweep, run_sweep_with, SweepOutput};
