//! Command-line driver for the moire relaxation models: JSON run
//! configuration, mode dispatch, CSV and SVG output.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{Mode, RunConfig};
pub use error::CliError;
pub use run::{run, ResultRecord};
