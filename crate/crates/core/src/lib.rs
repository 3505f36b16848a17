//! Alzheimer's MRI classification with frequency-domain input channels.
//!
//! The crate covers the full pipeline: 2D FFT feature extraction, dataset
//! ingestion and stratified splitting, a small convolutional network trained
//! with Adam, classification metrics, and a UMAP projection of the learned
//! latent space.

pub mod data;
pub mod error;
pub mod evalmetrics;
pub mod model;
pub mod numerics;
pub mod spectral;
pub mod train;
pub mod umap;

pub use data::{Dataset, DiagnosticClass, Sample, SplitTag, NUM_CLASSES};
pub use error::{Error, Result};
pub use evalmetrics::ConfusionMatrix;
pub use model::{AdamConfig, Architecture, ModelParams};
pub use numerics::{RngStream, Tensor};
pub use spectral::{InputMode, KSpacePlanes};
pub use train::{EpochRecord, Evaluation, MultiSeedResult, RunHistory, TrainConfig};
pub use umap::{Embedding2D, UmapConfig};
