//! `fairkit`: CSV and fixture ingestion, audit reports, and the command line
//! built on `fairkit-core`.

pub mod cli;
pub mod error;
pub mod fixture;
pub mod ingest;
pub mod report;
pub mod schema;
pub mod synth;

pub use cli::run;
pub use error::{CliError, Result};
