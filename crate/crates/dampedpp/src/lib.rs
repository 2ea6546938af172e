//! Configuration, file formats and the command-line front end for
//! [`dampedpp_core`].
//!
//! A run is described by one JSON document (see [`config::RunConfig`]).
//! Commands turn it into tables (CSV or JSON) and JSON reports, all carrying
//! `"schema_version": 1`. Exit statuses: 0 success, 1 I/O error, 2 invalid
//! configuration, 3 numeric failure.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod sweep;

pub use error::CliError;
