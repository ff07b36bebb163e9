//! Scenario files: parsing, validation, execution and report output.

mod config;
pub mod expr;
mod run;
pub mod svg;

pub use config::{process_fields, Entry, GridSpec, Scenario, Source, TaskKind, TaskSpec, MODELS};
pub use run::{fmt_f64, run_scenario, validate, RunOutcome, EXIT_FLAGGED, SCHEMA_VERSION};
