//! File formats, trace output and the command-line front end for
//! [`setprio_core`].
//!
//! Chain, hierarchy and scenario descriptions are JSON documents (see
//! [`config`]). Runs produce a CSV trace and JSON metrics ([`output`]).

pub mod cli;
pub mod config;
pub mod error;
pub mod fdcheck;
pub mod output;

pub use error::{AppError, ExitCode};
