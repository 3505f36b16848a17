//! UMAP projection of latent vectors to the plane: exact k-nearest
//! neighbors, a fuzzy neighborhood graph with per-point calibrated
//! bandwidths, and edge-sampled stochastic layout optimization from a random
//! start.

mod curve;
mod fuzzy;
mod knn;
mod layout;
mod quality;

use serde::{Deserialize, Serialize};

use crate::data::DiagnosticClass;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub use curve::{fit_ab, low_dim_similarity};
pub use fuzzy::{directed_weights, fuzzy_graph, fuzzy_union, smooth_knn_params, FuzzyGraph};
pub use knn::{knn, KnnResult};
pub use layout::{optimize_layout, random_init, spectral_or_random_init};
pub use quality::trustworthiness;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UmapConfig {
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub n_epochs: usize,
    pub local_connectivity: usize,
    pub negative_sample_rate: usize,
    pub seed: u64,
}

impl Default for UmapConfig {
    fn default() -> Self {
        Self {
            n_neighbors: 15,
            min_dist: 0.1,
            spread: 1.0,
            n_epochs: 200,
            local_connectivity: 1,
            negative_sample_rate: 5,
            seed: 0,
        }
    }
}

impl UmapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_neighbors < 2 {
            return Err(Error::Config(format!(
                "n_neighbors must be at least 2, got {}",
                self.n_neighbors
            )));
        }
        if !(self.min_dist > 0.0 && self.min_dist <= self.spread) {
            return Err(Error::Config(format!(
                "need 0 < min_dist <= spread, got min_dist {} spread {}",
                self.min_dist, self.spread
            )));
        }
        if self.n_epochs == 0 {
            return Err(Error::Config("n_epochs must be at least 1".into()));
        }
        if self.local_connectivity == 0 || self.local_connectivity > self.n_neighbors {
            return Err(Error::Config(format!(
                "local_connectivity must lie in 1..={}, got {}",
                self.n_neighbors, self.local_connectivity
            )));
        }
        Ok(())
    }
}

/// 2-D coordinates with the class of every point.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding2D {
    /// `N x 2`
    pub coords: Tensor,
    pub labels: Vec<DiagnosticClass>,
    /// Checkpoint epoch whose latents were embedded.
    pub epoch_tag: usize,
}

/// Full pipeline from `N x D` points to `N x 2` coordinates.
pub fn umap_embed(points: &Tensor, config: &UmapConfig) -> Result<Tensor> {
    config.validate()?;
    let n = points.shape()[0];
    if n <= config.n_neighbors {
        return Err(Error::Argument(format!(
            "{n} points is too few for n_neighbors = {}",
            config.n_neighbors
        )));
    }
    let neighbors = knn(points, config.n_neighbors)?;
    let calib: Vec<(f64, f64)> = neighbors
        .distances
        .iter()
        .map(|d| smooth_knn_params(d, config.n_neighbors, config.local_connectivity))
        .collect();
    let graph = fuzzy_graph(&neighbors, &calib)?;
    let (a, b) = fit_ab(config.min_dist, config.spread)?;
    let init = spectral_or_random_init(&graph, config.seed);
    optimize_layout(&graph, &init, a, b, config)
}

/// [`umap_embed`] plus labels and checkpoint tag.
pub fn embed_latents(
    latents: &Tensor,
    labels: &[DiagnosticClass],
    epoch_tag: usize,
    config: &UmapConfig,
) -> Result<Embedding2D> {
    if labels.len() != latents.shape()[0] {
        return Err(Error::Argument(format!(
            "{} labels for {} latent vectors",
            labels.len(),
            latents.shape()[0]
        )));
    }
    Ok(Embedding2D {
        coords: umap_embed(latents, config)?,
        labels: labels.to_vec(),
        epoch_tag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(UmapConfig::default().validate().is_ok());
        let bad = |f: fn(&mut UmapConfig)| {
            let mut c = UmapConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.n_neighbors = 1));
        assert!(bad(|c| c.min_dist = 0.0));
        assert!(bad(|c| c.min_dist = 2.0));
        assert!(bad(|c| c.n_epochs = 0));
        assert!(bad(|c| c.local_connectivity = 0));
    }

    #[test]
    fn too_few_points() {
        let pts = Tensor::zeros(&[10, 3]);
        assert!(umap_embed(&pts, &UmapConfig::default()).is_err());
    }
}
