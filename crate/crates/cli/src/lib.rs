//! Library surface of the pipeline driver; the binary in `main.rs` is a
//! thin argument-parsing shell over these stages.

pub mod config;
pub mod error;
pub mod formats;
pub mod run;

pub use config::{Overrides, Parameters, RunConfig};
pub use error::{CliError, CliResult};
