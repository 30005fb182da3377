//! Command-line front end: configuration, momentum sweeps, reports.

pub mod commands;
pub mod config;
pub mod output;
pub mod sweep;
pub mod validate;
