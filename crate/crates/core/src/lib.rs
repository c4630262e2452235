//! Spatio-temporal surveillance of coastal strandings.
//!
//! The pipeline is: [`ingest`] stranding records into a weekly panel, describe them,
//! fit a Tweedie latent Gaussian model ([`tweedie`], [`gmrf`], [`inference`]) by Laplace
//! approximation, and turn the fit into control charts ([`monitor`]).

pub mod error;
pub mod gmrf;
pub mod inference;
pub mod ingest;
pub mod monitor;
pub mod numeric;
pub mod sparse;
pub mod tweedie;

pub use error::{Error, Result};
