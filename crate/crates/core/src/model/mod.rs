//! CNN classifier shared by both input arms.
//!
//! Three `[conv3x3 -> ReLU -> maxpool2x2]` blocks, a ReLU hidden layer whose
//! activations are the latent embedding, and a four-way linear head. The two
//! arms differ only in the input channel count of the first convolution.

mod adam;
mod checkpoint;
mod layers;
mod network;

use serde::{Deserialize, Serialize};

use crate::data::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::numerics::{seeded_rng, Tensor};
use crate::spectral::InputMode;

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use layers::{col2im_3x3, conv2d, im2col_3x3, maxpool2x2};
pub use network::{
    forward, infer, loss_and_grads, softmax_rows, training_step, ForwardTrace, Inference,
    SampleCache, StepOutput,
};

/// Layer widths of the backbone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// Output channels of the three convolution blocks.
    pub widths: [usize; 3],
    /// Width of the hidden (latent) layer.
    pub hidden: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            widths: [16, 32, 64],
            hidden: 128,
        }
    }
}

impl Architecture {
    /// Flattened feature length after the last pooling stage.
    pub fn feature_len(&self, image_size: usize) -> usize {
        let side = image_size / 8;
        self.widths[2] * side * side
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    /// `Cout x Cin x 3 x 3`
    pub kernels: Tensor,
    /// `Cout`
    pub bias: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `out x in`
    pub weights: Tensor,
    /// `out`
    pub bias: Tensor,
}

/// Every trainable tensor of one network, tagged with its input mode.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub mode: InputMode,
    pub arch: Architecture,
    pub image_size: usize,
    pub convs: Vec<ConvLayer>,
    pub fc1: Dense,
    pub fc2: Dense,
}

fn check_image_size(image_size: usize) -> Result<()> {
    if image_size == 0 || !image_size.is_multiple_of(8) {
        return Err(Error::Shape(format!(
            "spatial extent must be a positive multiple of 8, got {image_size}"
        )));
    }
    Ok(())
}

impl ModelParams {
    /// All-zero parameters with the shapes implied by `(mode, arch, image_size)`.
    pub fn zeros(mode: InputMode, arch: Architecture, image_size: usize) -> Result<Self> {
        check_image_size(image_size)?;
        if arch.widths.contains(&0) || arch.hidden == 0 {
            return Err(Error::Shape(format!("layer widths must be positive: {arch:?}")));
        }
        let mut cin = mode.channels();
        let convs = arch
            .widths
            .iter()
            .map(|&cout| {
                let layer = ConvLayer {
                    kernels: Tensor::zeros(&[cout, cin, 3, 3]),
                    bias: Tensor::zeros(&[cout]),
                };
                cin = cout;
                layer
            })
            .collect();
        let f = arch.feature_len(image_size);
        Ok(Self {
            mode,
            arch,
            image_size,
            convs,
            fc1: Dense {
                weights: Tensor::zeros(&[arch.hidden, f]),
                bias: Tensor::zeros(&[arch.hidden]),
            },
            fc2: Dense {
                weights: Tensor::zeros(&[NUM_CLASSES, arch.hidden]),
                bias: Tensor::zeros(&[NUM_CLASSES]),
            },
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.data_mut().fill(0.0);
        }
        z
    }

    /// Tensors in canonical order: conv kernels and biases per block, then
    /// fc1 and fc2 weights and biases.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::with_capacity(10);
        for c in &self.convs {
            out.push(&c.kernels);
            out.push(&c.bias);
        }
        out.extend([&self.fc1.weights, &self.fc1.bias, &self.fc2.weights, &self.fc2.bias]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::with_capacity(10);
        for c in &mut self.convs {
            out.push(&mut c.kernels);
            out.push(&mut c.bias);
        }
        out.extend([
            &mut self.fc1.weights,
            &mut self.fc1.bias,
            &mut self.fc2.weights,
            &mut self.fc2.bias,
        ]);
        out
    }

    /// Names matching [`ModelParams::tensors`].
    pub fn tensor_names() -> [&'static str; 10] {
        [
            "conv1.kernels",
            "conv1.bias",
            "conv2.kernels",
            "conv2.bias",
            "conv3.kernels",
            "conv3.bias",
            "fc1.weights",
            "fc1.bias",
            "fc2.weights",
            "fc2.bias",
        ]
    }

    /// `(name, shape)` for every tensor.
    pub fn census(&self) -> Vec<(&'static str, Vec<usize>)> {
        Self::tensor_names()
            .into_iter()
            .zip(self.tensors())
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// `self += other * scale`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += scale * y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }
}

/// He-normal initialization: weights `~ N(0, 2 / fan_in)`, biases zero.
pub fn init_params(
    mode: InputMode,
    arch: Architecture,
    image_size: usize,
    seed: u64,
) -> Result<ModelParams> {
    let mut params = ModelParams::zeros(mode, arch, image_size)?;
    let mut rng = seeded_rng(seed);
    let mut fill = |t: &mut Tensor, fan_in: usize| {
        let std = (2.0 / fan_in as f64).sqrt();
        for v in t.data_mut() {
            *v = std * rng.normal();
        }
    };
    for conv in &mut params.convs {
        let fan_in = conv.kernels.shape()[1] * 9;
        fill(&mut conv.kernels, fan_in);
    }
    let f = params.fc1.weights.shape()[1];
    fill(&mut params.fc1.weights, f);
    fill(&mut params.fc2.weights, arch.hidden);
    Ok(params)
}
