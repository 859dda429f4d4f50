//! Library side of the `uavnoma` command-line tool: configuration, CSV
//! output, the subcommands and the oracle checks they share with the
//! acceptance suite.

pub mod checks;
pub mod commands;
pub mod config;
pub mod csv;

pub use commands::{cmd_outage_sweep, cmd_pdf_compare, cmd_validate, CommandError, CommandOutcome, Scheme};
pub use config::{ConfigError, RunConfig};
