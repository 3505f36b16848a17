//! Multi-seed training protocol: per-epoch metrics, checkpoint snapshots at
//! fixed epochs, and averaging across runs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{batches, Dataset, SplitTag};
use crate::error::{Error, Result};
use crate::evalmetrics::{accuracy, argmax_rows, auc_ovr, confusion, specificity, ConfusionMatrix};
use crate::model::{
    adam_step, infer, init_params, training_step, AdamConfig, AdamState, Architecture, ModelParams,
};
use crate::numerics::{child_seed, Tensor};
use crate::spectral::InputMode;

pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
pub const DEFAULT_CHECKPOINT_EPOCHS: [usize; 3] = [3, 6, 9];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub checkpoint_epochs: Vec<usize>,
    pub adam: AdamConfig,
    pub arch: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 9,
            batch_size: 32,
            checkpoint_epochs: DEFAULT_CHECKPOINT_EPOCHS.to_vec(),
            adam: AdamConfig::default(),
            arch: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if let Some(&e) = self.checkpoint_epochs.iter().find(|&&e| e == 0 || e > self.epochs) {
            return Err(Error::Config(format!(
                "checkpoint epoch {e} outside 1..={}",
                self.epochs
            )));
        }
        if !(self.adam.lr > 0.0 && self.adam.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.adam.lr)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub specificity: f64,
    pub auc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunHistory {
    pub mode: InputMode,
    pub seed: u64,
    pub records: Vec<EpochRecord>,
    /// `(epoch, parameters)` snapshots in epoch order.
    pub checkpoints: Vec<(usize, ModelParams)>,
}

impl RunHistory {
    pub fn checkpoint(&self, epoch: usize) -> Option<&ModelParams> {
        self.checkpoints.iter().find(|(e, _)| *e == epoch).map(|(_, p)| p)
    }
}

/// Validation-split outputs of one model.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub loss: f64,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub specificity: f64,
    pub auc: f64,
    /// Softmax probabilities, `N x 4`, in validation order.
    pub probs: Tensor,
    /// Latent vectors, `N x hidden`.
    pub latent: Tensor,
    pub labels: Vec<usize>,
    /// Dataset indices of the rows.
    pub indices: Vec<usize>,
}

/// Evaluate `params` on the validation split, in dataset order.
pub fn evaluate(params: &ModelParams, dataset: &Dataset, batch_size: usize) -> Result<Evaluation> {
    let mut probs = Vec::new();
    let mut latent = Vec::new();
    let mut labels = Vec::new();
    let mut indices = Vec::new();
    let mut loss = 0.0;
    for batch in batches(dataset, SplitTag::Validation, batch_size, params.mode, 0)? {
        let out = infer(params, &batch.inputs)?;
        let p = crate::model::softmax_rows(&out.logits);
        for (row, &l) in batch.labels.iter().enumerate() {
            loss -= p.at2(row, l).max(f64::MIN_POSITIVE).ln();
        }
        probs.extend_from_slice(p.data());
        latent.extend_from_slice(out.latent.data());
        labels.extend_from_slice(&batch.labels);
        indices.extend_from_slice(&batch.indices);
    }
    let n = labels.len();
    let probs = Tensor::new(&[n, 4], probs)?;
    let latent = Tensor::new(&[n, params.arch.hidden], latent)?;
    let preds = argmax_rows(&probs);
    let cm = confusion(&preds, &labels)?;
    Ok(Evaluation {
        loss: loss / n as f64,
        accuracy: accuracy(&cm)?,
        specificity: specificity(&cm)?,
        auc: auc_ovr(&probs, &labels)?,
        confusion: cm,
        probs,
        latent,
        labels,
        indices,
    })
}

/// Train one arm from one seed.
pub fn train_run(
    config: &TrainConfig,
    dataset: &Dataset,
    mode: InputMode,
    seed: u64,
) -> Result<RunHistory> {
    train_run_with(config, dataset, mode, seed, &|_, _, _| {})
}

/// [`train_run`] reporting each finished epoch to `on_epoch(mode, seed, record)`.
pub fn train_run_with(
    config: &TrainConfig,
    dataset: &Dataset,
    mode: InputMode,
    seed: u64,
    on_epoch: &(dyn Fn(InputMode, u64, &EpochRecord) + Sync),
) -> Result<RunHistory> {
    config.validate()?;
    for tag in [SplitTag::Train, SplitTag::Validation] {
        if dataset.indices(tag).is_empty() {
            return Err(Error::Argument(format!("dataset has no {} samples", tag.as_str())));
        }
    }
    let mut params = init_params(mode, config.arch, dataset.image_size(), child_seed(seed, 0))?;
    let mut state = AdamState::new(&params);
    let mut history = RunHistory {
        mode,
        seed,
        records: Vec::with_capacity(config.epochs),
        checkpoints: Vec::new(),
    };

    for epoch in 1..=config.epochs {
        let shuffle_seed = child_seed(seed, epoch as u64);
        let (mut loss_sum, mut correct, mut seen) = (0.0, 0usize, 0usize);
        for (bi, batch) in batches(dataset, SplitTag::Train, config.batch_size, mode, shuffle_seed)?
            .enumerate()
        {
            let step = training_step(&params, &batch.inputs, &batch.labels)?;
            if !step.loss.is_finite() {
                return Err(Error::TrainingDivergence(format!(
                    "{mode} seed {seed}: loss {} at epoch {epoch}, batch {bi}",
                    step.loss
                )));
            }
            adam_step(&mut params, &step.grads, &mut state, &config.adam).map_err(|e| match e {
                Error::TrainingDivergence(m) => Error::TrainingDivergence(format!(
                    "{mode} seed {seed}: {m} at epoch {epoch}, batch {bi}"
                )),
                other => other,
            })?;
            let n = batch.labels.len();
            loss_sum += step.loss * n as f64;
            seen += n;
            correct += argmax_rows(&step.logits)
                .iter()
                .zip(&batch.labels)
                .filter(|(p, l)| p == l)
                .count();
        }
        let eval = evaluate(&params, dataset, config.batch_size)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / seen as f64,
            train_acc: correct as f64 / seen as f64,
            val_loss: eval.loss,
            val_acc: eval.accuracy,
            specificity: eval.specificity,
            auc: eval.auc,
        };
        on_epoch(mode, seed, &record);
        history.records.push(record);
        if config.checkpoint_epochs.contains(&epoch) {
            history.checkpoints.push((epoch, params.clone()));
        }
    }
    Ok(history)
}

/// Field-wise arithmetic mean of per-run records, epoch by epoch.
pub fn average_records(runs: &[&[EpochRecord]]) -> Result<Vec<EpochRecord>> {
    let first = runs
        .first()
        .ok_or_else(|| Error::Aggregation("no runs to average".into()))?;
    for r in runs {
        let epochs: Vec<usize> = r.iter().map(|x| x.epoch).collect();
        let want: Vec<usize> = first.iter().map(|x| x.epoch).collect();
        if epochs != want {
            return Err(Error::Aggregation(format!(
                "runs disagree on recorded epochs: {want:?} vs {epochs:?}"
            )));
        }
    }
    let n = runs.len() as f64;
    Ok((0..first.len())
        .map(|i| {
            let mean = |f: fn(&EpochRecord) -> f64| runs.iter().map(|r| f(&r[i])).sum::<f64>() / n;
            EpochRecord {
                epoch: first[i].epoch,
                train_loss: mean(|r| r.train_loss),
                train_acc: mean(|r| r.train_acc),
                val_loss: mean(|r| r.val_loss),
                val_acc: mean(|r| r.val_acc),
                specificity: mean(|r| r.specificity),
                auc: mean(|r| r.auc),
            }
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct MultiSeedResult {
    pub averaged: Vec<EpochRecord>,
    pub runs: Vec<RunHistory>,
}

/// Train one arm once per seed and average the epoch records.
pub fn multi_seed(
    config: &TrainConfig,
    dataset: &Dataset,
    mode: InputMode,
    seeds: &[u64],
) -> Result<MultiSeedResult> {
    multi_seed_with(config, dataset, mode, seeds, &|_, _, _| {})
}

pub fn multi_seed_with(
    config: &TrainConfig,
    dataset: &Dataset,
    mode: InputMode,
    seeds: &[u64],
    on_epoch: &(dyn Fn(InputMode, u64, &EpochRecord) + Sync),
) -> Result<MultiSeedResult> {
    if seeds.is_empty() {
        return Err(Error::Argument("at least one seed is required".into()));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != seeds.len() {
        return Err(Error::Argument(format!("seeds must be distinct: {seeds:?}")));
    }
    let runs = seeds
        .par_iter()
        .map(|&s| train_run_with(config, dataset, mode, s, on_epoch))
        .collect::<Result<Vec<_>>>()?;
    let records: Vec<&[EpochRecord]> = runs.iter().map(|r| r.records.as_slice()).collect();
    Ok(MultiSeedResult {
        averaged: average_records(&records)?,
        runs,
    })
}
