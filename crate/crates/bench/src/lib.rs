//! Deterministic inputs for the criterion benchmarks.

use kspace_core::numerics::{seeded_rng, Tensor};

/// Uniform `[0, 1)` image.
pub fn image(size: usize, seed: u64) -> Tensor {
    let mut rng = seeded_rng(seed);
    Tensor::from_fn(&[size, size], |_| rng.uniform())
}

/// Standard-normal `batch x channels x size x size` input with cyclic labels.
pub fn batch(batch: usize, channels: usize, size: usize, seed: u64) -> (Tensor, Vec<usize>) {
    let mut rng = seeded_rng(seed);
    let inputs = Tensor::from_fn(&[batch, channels, size, size], |_| rng.normal());
    (inputs, (0..batch).map(|i| i % 4).collect())
}

/// Standard-normal `n x dim` point cloud.
pub fn points(n: usize, dim: usize, seed: u64) -> Tensor {
    let mut rng = seeded_rng(seed);
    Tensor::from_fn(&[n, dim], |_| rng.normal())
}
