//! Command-line orchestration for the corpus-similarity and self-training
//! toolkit: configuration handling plus the ingest, sweep, similarity and
//! report commands. The `selfgain` binary is a thin argument parser over
//! this crate.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_generate, cmd_ingest, cmd_report, cmd_similarity, cmd_sweep, CommandError, DomainSummary,
    IngestReport, SweepReport,
};
pub use config::{ConfigError, Mode, Protocol, RunConfig};
