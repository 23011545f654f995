//! Command-line front end for p2atlas: configuration, subcommands, and file output.

pub mod commands;
pub mod config;
pub mod emit;
