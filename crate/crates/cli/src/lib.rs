//! Library surface of the experiment driver: configuration parsing and the
//! pipeline commands, reused by the `dgsim` binary and the test suites.

pub mod commands;
pub mod config;
