//! Files, experiments and validation suites on top of `vgne-core`.
//!
//! - [`config`]: JSON game and experiment configuration;
//! - [`csvio`]: trace and sweep CSV writers and a strict reader;
//! - [`reference`]: the equilibrium file;
//! - [`experiment`]: seeded runs, sidecar metadata and sweep statistics;
//! - [`validate`]: property suites;
//! - [`cli`]: the `vgne` command.

pub mod cli;
pub mod config;
pub mod csvio;
pub mod error;
pub mod experiment;
pub mod reference;
pub mod validate;

pub use error::{CliError, CliResult};
