//! Figures of merit, the Monte-Carlo experiment runner and the CLI.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod metrics;
