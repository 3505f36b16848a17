use rayon::prelude::*;

use crate::data::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::numerics::{gemm, MatRef, Tensor};

use super::layers::{col2im_3x3, conv_sample, im2col_3x3, maxpool_sample};
use super::ModelParams;

/// Samples per work unit. Fixed, so results never depend on thread count.
const CHUNK: usize = 8;

/// Per-sample activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct SampleCache {
    /// Input to each convolution block.
    conv_inputs: [Vec<f64>; 3],
    /// Post-ReLU, pre-pool activation of each block.
    activations: [Vec<f64>; 3],
    /// Winning input index for every pooled output.
    pool_index: [Vec<u32>; 3],
}

#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// `B x 4`
    pub logits: Tensor,
    /// `B x hidden`, post-ReLU hidden activations fed to the output layer.
    pub latent: Tensor,
    /// `B x F` flattened output of the last pooling stage.
    pub features: Tensor,
    pub caches: Vec<SampleCache>,
}

/// Forward outputs without backward caches.
#[derive(Clone, Debug)]
pub struct Inference {
    pub logits: Tensor,
    pub latent: Tensor,
}

/// Loss, gradients and logits of one mini-batch.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub loss: f64,
    pub grads: ModelParams,
    pub logits: Tensor,
}

struct ChunkForward {
    n: usize,
    features: Vec<f64>,
    latent: Vec<f64>,
    logits: Vec<f64>,
    caches: Vec<SampleCache>,
}

fn check_batch(params: &ModelParams, batch: &Tensor) -> Result<usize> {
    let (b, c, h, w) = match *batch.shape() {
        [b, c, h, w] => (b, c, h, w),
        ref s => return Err(Error::Shape(format!("batch must be B x C x H x W, got {s:?}"))),
    };
    if h % 8 != 0 || w % 8 != 0 {
        return Err(Error::Shape(format!(
            "spatial extent {h}x{w} is not divisible by 8"
        )));
    }
    if c != params.mode.channels() {
        return Err(Error::Shape(format!(
            "{} model expects {} channels, batch has {c}",
            params.mode,
            params.mode.channels()
        )));
    }
    if h != params.image_size || w != params.image_size {
        return Err(Error::Shape(format!(
            "model built for {0}x{0} inputs, batch is {h}x{w}",
            params.image_size
        )));
    }
    Ok(b)
}

fn conv_stack(params: &ModelParams, input: &[f64], keep: bool) -> (Vec<f64>, Option<SampleCache>) {
    let mut cache = SampleCache {
        conv_inputs: Default::default(),
        activations: Default::default(),
        pool_index: Default::default(),
    };
    let mut x = input.to_vec();
    let mut cin = params.mode.channels();
    let mut side = params.image_size;
    let mut cols = Vec::new();
    for (l, conv) in params.convs.iter().enumerate() {
        let cout = conv.kernels.shape()[0];
        let mut act = vec![0.0; cout * side * side];
        conv_sample(&x, cin, side, side, &conv.kernels, &conv.bias, &mut cols, &mut act);
        act.iter_mut().for_each(|v| *v = v.max(0.0));
        let (pooled, idx) = maxpool_sample(&act, cout, side, side);
        if keep {
            cache.conv_inputs[l] = std::mem::take(&mut x);
            cache.activations[l] = act;
            cache.pool_index[l] = idx;
        }
        x = pooled;
        cin = cout;
        side /= 2;
    }
    (x, keep.then_some(cache))
}

fn chunk_forward(params: &ModelParams, inputs: &[f64], n: usize, keep: bool) -> ChunkForward {
    let per = inputs.len() / n;
    let f = params.fc1.weights.shape()[1];
    let hidden = params.arch.hidden;
    let mut features = Vec::with_capacity(n * f);
    let mut caches = Vec::with_capacity(if keep { n } else { 0 });
    for s in 0..n {
        let (feat, cache) = conv_stack(params, &inputs[s * per..(s + 1) * per], keep);
        features.extend_from_slice(&feat);
        caches.extend(cache);
    }

    let mut latent = vec![0.0; n * hidden];
    for row in latent.chunks_exact_mut(hidden) {
        row.copy_from_slice(params.fc1.bias.data());
    }
    gemm(
        1.0,
        MatRef::new(&features, n, f),
        MatRef::new(params.fc1.weights.data(), hidden, f).t(),
        1.0,
        &mut latent,
    );
    latent.iter_mut().for_each(|v| *v = v.max(0.0));

    let mut logits = vec![0.0; n * NUM_CLASSES];
    for row in logits.chunks_exact_mut(NUM_CLASSES) {
        row.copy_from_slice(params.fc2.bias.data());
    }
    gemm(
        1.0,
        MatRef::new(&latent, n, hidden),
        MatRef::new(params.fc2.weights.data(), NUM_CLASSES, hidden).t(),
        1.0,
        &mut logits,
    );
    ChunkForward {
        n,
        features,
        latent,
        logits,
        caches,
    }
}

fn run_chunks(params: &ModelParams, batch: &Tensor, keep: bool) -> Result<Vec<ChunkForward>> {
    let b = check_batch(params, batch)?;
    let per = batch.len() / b;
    Ok(batch
        .data()
        .par_chunks(CHUNK * per)
        .map(|inputs| chunk_forward(params, inputs, inputs.len() / per, keep))
        .collect())
}

fn concat(parts: impl Iterator<Item = Vec<f64>>, rows: usize, cols: usize) -> Tensor {
    let data: Vec<f64> = parts.flatten().collect();
    Tensor::new(&[rows, cols], data).expect("chunk outputs have consistent sizes")
}

/// Forward pass keeping every activation needed for backpropagation.
pub fn forward(params: &ModelParams, batch: &Tensor) -> Result<ForwardTrace> {
    let chunks = run_chunks(params, batch, true)?;
    let b = batch.shape()[0];
    let f = params.fc1.weights.shape()[1];
    let hidden = params.arch.hidden;
    let mut caches = Vec::with_capacity(b);
    let (mut feats, mut lat, mut log) = (Vec::new(), Vec::new(), Vec::new());
    for c in chunks {
        feats.push(c.features);
        lat.push(c.latent);
        log.push(c.logits);
        caches.extend(c.caches);
    }
    Ok(ForwardTrace {
        logits: concat(log.into_iter(), b, NUM_CLASSES),
        latent: concat(lat.into_iter(), b, hidden),
        features: concat(feats.into_iter(), b, f),
        caches,
    })
}

/// Forward pass returning only logits and latent vectors.
pub fn infer(params: &ModelParams, batch: &Tensor) -> Result<Inference> {
    let chunks = run_chunks(params, batch, false)?;
    let b = batch.shape()[0];
    let (mut lat, mut log) = (Vec::new(), Vec::new());
    for c in chunks {
        lat.push(c.latent);
        log.push(c.logits);
    }
    Ok(Inference {
        logits: concat(log.into_iter(), b, NUM_CLASSES),
        latent: concat(lat.into_iter(), b, params.arch.hidden),
    })
}

/// Row-wise softmax via log-sum-exp.
pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let cols = logits.shape()[1];
    let mut out = logits.clone();
    for row in out.data_mut().chunks_exact_mut(cols) {
        let lse = log_sum_exp(row);
        row.iter_mut().for_each(|v| *v = (*v - lse).exp());
    }
    out
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn check_labels(labels: &[usize], b: usize) -> Result<()> {
    if labels.len() != b {
        return Err(Error::Argument(format!(
            "{} labels for a batch of {b}",
            labels.len()
        )));
    }
    if let Some(l) = labels.iter().find(|&&l| l >= NUM_CLASSES) {
        return Err(Error::Argument(format!(
            "label {l} outside 0..{NUM_CLASSES}"
        )));
    }
    Ok(())
}

/// Backward pass of one chunk; accumulates into `grads`, returns the summed
/// (unnormalized) cross-entropy of the chunk.
fn chunk_backward(
    params: &ModelParams,
    fwd: &ChunkForward,
    labels: &[usize],
    inv_batch: f64,
    grads: &mut ModelParams,
) -> f64 {
    let n = fwd.n;
    let f = params.fc1.weights.shape()[1];
    let hidden = params.arch.hidden;

    let mut loss = 0.0;
    let mut dlogits = vec![0.0; n * NUM_CLASSES];
    for s in 0..n {
        let z = &fwd.logits[s * NUM_CLASSES..(s + 1) * NUM_CLASSES];
        let lse = log_sum_exp(z);
        loss += lse - z[labels[s]];
        for k in 0..NUM_CLASSES {
            let p = (z[k] - lse).exp();
            let target = if k == labels[s] { 1.0 } else { 0.0 };
            dlogits[s * NUM_CLASSES + k] = (p - target) * inv_batch;
        }
    }

    // Output layer.
    gemm(
        1.0,
        MatRef::new(&dlogits, n, NUM_CLASSES).t(),
        MatRef::new(&fwd.latent, n, hidden),
        1.0,
        grads.fc2.weights.data_mut(),
    );
    add_column_sums(&dlogits, NUM_CLASSES, grads.fc2.bias.data_mut());
    let mut dhidden = vec![0.0; n * hidden];
    gemm(
        1.0,
        MatRef::new(&dlogits, n, NUM_CLASSES),
        MatRef::new(params.fc2.weights.data(), NUM_CLASSES, hidden),
        0.0,
        &mut dhidden,
    );
    for (d, &a) in dhidden.iter_mut().zip(&fwd.latent) {
        if a <= 0.0 {
            *d = 0.0;
        }
    }

    // Hidden layer.
    gemm(
        1.0,
        MatRef::new(&dhidden, n, hidden).t(),
        MatRef::new(&fwd.features, n, f),
        1.0,
        grads.fc1.weights.data_mut(),
    );
    add_column_sums(&dhidden, hidden, grads.fc1.bias.data_mut());
    let mut dfeatures = vec![0.0; n * f];
    gemm(
        1.0,
        MatRef::new(&dhidden, n, hidden),
        MatRef::new(params.fc1.weights.data(), hidden, f),
        0.0,
        &mut dfeatures,
    );

    let mut cols = Vec::new();
    for (s, cache) in fwd.caches.iter().enumerate() {
        conv_backward(params, cache, &dfeatures[s * f..(s + 1) * f], grads, &mut cols);
    }
    loss
}

fn add_column_sums(m: &[f64], cols: usize, out: &mut [f64]) {
    for row in m.chunks_exact(cols) {
        out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
    }
}

fn conv_backward(
    params: &ModelParams,
    cache: &SampleCache,
    dfeatures: &[f64],
    grads: &mut ModelParams,
    cols: &mut Vec<f64>,
) {
    let mut dpooled = dfeatures.to_vec();
    for l in (0..params.convs.len()).rev() {
        let side = params.image_size >> l;
        let hw = side * side;
        let kernels = &params.convs[l].kernels;
        let (cout, cin) = (kernels.shape()[0], kernels.shape()[1]);

        let mut dact = vec![0.0; cout * hw];
        for (&ix, &g) in cache.pool_index[l].iter().zip(&dpooled) {
            dact[ix as usize] = g;
        }
        for (d, &a) in dact.iter_mut().zip(&cache.activations[l]) {
            if a <= 0.0 {
                *d = 0.0;
            }
        }

        im2col_3x3(&cache.conv_inputs[l], cin, side, side, cols);
        let g = &mut grads.convs[l];
        gemm(
            1.0,
            MatRef::new(&dact, cout, hw),
            MatRef::new(cols, cin * 9, hw).t(),
            1.0,
            g.kernels.data_mut(),
        );
        for (o, row) in dact.chunks_exact(hw).enumerate() {
            g.bias.data_mut()[o] += row.iter().sum::<f64>();
        }

        if l > 0 {
            let mut dcols = std::mem::take(cols);
            gemm(
                1.0,
                MatRef::new(kernels.data(), cout, cin * 9).t(),
                MatRef::new(&dact, cout, hw),
                0.0,
                &mut dcols,
            );
            let mut dinput = vec![0.0; cin * hw];
            col2im_3x3(&dcols, cin, side, side, &mut dinput);
            *cols = dcols;
            dpooled = dinput;
        }
    }
}

/// Mean softmax cross-entropy, its gradient and the batch logits.
///
/// Work is split into fixed chunks processed in parallel; chunk gradients are
/// reduced in chunk order so the result is independent of thread count.
pub fn training_step(params: &ModelParams, batch: &Tensor, labels: &[usize]) -> Result<StepOutput> {
    let b = check_batch(params, batch)?;
    check_labels(labels, b)?;
    let per = batch.len() / b;
    let inv_batch = 1.0 / b as f64;
    let parts: Vec<(f64, ModelParams, Vec<f64>)> = batch
        .data()
        .par_chunks(CHUNK * per)
        .zip(labels.par_chunks(CHUNK))
        .map(|(inputs, labs)| {
            let fwd = chunk_forward(params, inputs, labs.len(), true);
            let mut g = params.zeros_like();
            let loss = chunk_backward(params, &fwd, labs, inv_batch, &mut g);
            (loss, g, fwd.logits)
        })
        .collect();

    let mut grads = params.zeros_like();
    let mut loss = 0.0;
    let mut logits = Vec::with_capacity(b * NUM_CLASSES);
    for (l, g, z) in parts {
        loss += l;
        grads.add_scaled(&g, 1.0);
        logits.extend(z);
    }
    Ok(StepOutput {
        loss: loss * inv_batch,
        grads,
        logits: Tensor::new(&[b, NUM_CLASSES], logits)?,
    })
}

/// Mean softmax cross-entropy over the batch and its exact gradient.
pub fn loss_and_grads(
    params: &ModelParams,
    batch: &Tensor,
    labels: &[usize],
) -> Result<(f64, ModelParams)> {
    let out = training_step(params, batch, labels)?;
    Ok((out.loss, out.grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, Architecture};
    use crate::numerics::seeded_rng;
    use crate::spectral::InputMode;

    fn toy_arch() -> Architecture {
        Architecture {
            widths: [4, 8, 8],
            hidden: 16,
        }
    }

    fn random_batch(b: usize, c: usize, size: usize, seed: u64) -> Tensor {
        let mut r = seeded_rng(seed);
        Tensor::from_fn(&[b, c, size, size], |_| r.uniform())
    }

    #[test]
    fn zero_params_give_zero_outputs_and_ln4_loss() {
        let p = ModelParams::zeros(InputMode::Control, toy_arch(), 16).unwrap();
        let x = random_batch(3, 1, 16, 1);
        let t = forward(&p, &x).unwrap();
        assert_eq!(t.logits.max_abs(), 0.0);
        assert_eq!(t.latent.max_abs(), 0.0);
        let (loss, _) = loss_and_grads(&p, &x, &[0, 1, 3]).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn shapes_for_default_backbone() {
        let p = init_params(InputMode::Experimental, Architecture::default(), 64, 2).unwrap();
        let t = forward(&p, &random_batch(2, 3, 64, 3)).unwrap();
        assert_eq!(t.features.shape(), &[2, 4096]);
        assert_eq!(t.latent.shape(), &[2, 128]);
        assert_eq!(t.logits.shape(), &[2, 4]);
    }

    #[test]
    fn identical_rows_identical_logits() {
        let p = init_params(InputMode::Control, toy_arch(), 16, 4).unwrap();
        let one = random_batch(1, 1, 16, 5);
        let mut data = one.data().to_vec();
        data.extend_from_slice(one.data());
        let two = Tensor::new(&[2, 1, 16, 16], data).unwrap();
        let t = forward(&p, &two).unwrap();
        assert_eq!(t.logits.outer(0), t.logits.outer(1));
    }

    #[test]
    fn permutation_equivariant() {
        let p = init_params(InputMode::Experimental, toy_arch(), 16, 6).unwrap();
        let x = random_batch(11, 3, 16, 7);
        let perm = [3, 0, 10, 7, 1, 9, 2, 8, 4, 6, 5];
        let per = 3 * 16 * 16;
        let mut pd = Vec::new();
        for &i in &perm {
            pd.extend_from_slice(&x.data()[i * per..(i + 1) * per]);
        }
        let px = Tensor::new(x.shape(), pd).unwrap();
        let a = infer(&p, &x).unwrap();
        let b = infer(&p, &px).unwrap();
        for (row, &i) in perm.iter().enumerate() {
            for k in 0..4 {
                assert!((b.logits.at2(row, k) - a.logits.at2(i, k)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn infer_matches_forward() {
        let p = init_params(InputMode::Control, toy_arch(), 16, 8).unwrap();
        let x = random_batch(10, 1, 16, 9);
        let t = forward(&p, &x).unwrap();
        let i = infer(&p, &x).unwrap();
        assert_eq!(t.logits, i.logits);
        assert_eq!(t.latent, i.latent);
    }

    #[test]
    fn duplicated_batch_keeps_loss() {
        let p = init_params(InputMode::Control, toy_arch(), 16, 10).unwrap();
        let x = random_batch(3, 1, 16, 11);
        let mut d = x.data().to_vec();
        d.extend_from_slice(x.data());
        let xx = Tensor::new(&[6, 1, 16, 16], d).unwrap();
        let (l1, _) = loss_and_grads(&p, &x, &[0, 2, 1]).unwrap();
        let (l2, _) = loss_and_grads(&p, &xx, &[0, 2, 1, 0, 2, 1]).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let z = Tensor::new(&[2, 4], vec![1000., 999., -5., 0., -3., 2., 2., 0.1]).unwrap();
        let p = softmax_rows(&z);
        for r in 0..2 {
            let s: f64 = p.outer(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(p.is_finite());
    }

    #[test]
    fn rejects_bad_labels_and_shapes() {
        let p = init_params(InputMode::Control, toy_arch(), 16, 1).unwrap();
        let x = random_batch(2, 1, 16, 1);
        assert!(matches!(loss_and_grads(&p, &x, &[0, 4]), Err(Error::Argument(_))));
        assert!(matches!(
            forward(&p, &random_batch(2, 3, 16, 1)),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            forward(&p, &random_batch(1, 1, 12, 1)),
            Err(Error::Shape(_))
        ));
    }
}
