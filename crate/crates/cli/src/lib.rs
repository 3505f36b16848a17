//! Experiment runner for the k-space classification pipeline: synthetic data
//! generation, multi-seed training of both input arms, checkpoint
//! evaluation, latent-space embedding and the summary table.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

pub use config::{ModeSelection, RunConfig};
