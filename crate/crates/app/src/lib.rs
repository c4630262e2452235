//! Command-line driver and read-only JSON service around the carcasswatch engine.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod service;
pub mod views;

pub use config::RunConfig;
pub use error::{AppError, ExitStatus};
