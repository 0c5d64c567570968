//! Experiment runner for the wavelet q-Baskakov-Kantorovich operators:
//! figure reproductions, moment and Korovkin checks, rate experiments and
//! q-density estimates, emitted as CSV or SVG.

// `!(a > b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod expr;
pub mod output;

pub use config::{Command, ExperimentConfig, Format};
pub use error::CliError;
pub use experiments::{render, run, Artifact, Outcome};
