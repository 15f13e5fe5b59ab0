//! Command-line driver and HTTP labeling service for patch clustering runs.

pub mod cli;
pub mod service;

pub use cli::{execute, Cli};
