//! Library side of the `klausmeier` command-line tool.

pub mod commands;
pub mod config;
pub mod output;
