//! Experiment runners behind the `shot-alloc` binary.
//!
//! Each experiment lives in [`experiments`] as a plain configuration struct
//! with a `run` function. Runners stream result rows into a [`RowSink`] in
//! trial order and return a typed summary, so the same code backs the CLI and
//! the acceptance tests.

pub mod error;
pub mod experiments;
pub mod output;
pub mod pool;
pub mod stats;

pub use error::{CliError, CliResult};
pub use output::{Collect, Discard, Field, Format, RowSink, RowWriter};
