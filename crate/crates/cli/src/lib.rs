//! Command-line driver and local HTTP service for `gfield`.

pub mod commands;
pub mod error;
pub mod io;
pub mod manifest;
pub mod model_spec;
pub mod serve;

pub use commands::{run, Cli};
pub use error::{CliError, CliResult};
