//! Command line driver for the `wpgcr` solvers: single solves, tables of
//! `ρ(M⁻¹N)`, parameter sweeps and bound reports.

pub mod args;
pub mod commands;

pub use commands::{run, CliError};
