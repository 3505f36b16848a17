//! Dense tensors, seeded random streams and the matrix kernels the rest of
//! the crate is built on.

mod linalg;
mod rng;
mod tensor;

pub use linalg::{gemm, matmul, MatRef};
pub use rng::{child_seed, seeded_rng, RngStream};
pub use tensor::Tensor;
