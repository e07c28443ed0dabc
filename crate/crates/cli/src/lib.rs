//! Configuration, orchestration and output for the `coclab` binary.

// Range checks are written `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod plot;
pub mod runner;

pub use config::{canonical_print, config_hash, parse_config, ConfigError, RunConfig};
pub use runner::{run, Command, Outcome, OutputPlan};
