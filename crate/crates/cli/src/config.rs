//! Run configuration: one flat JSON document, every field optional.

use std::path::Path;

use anyhow::{bail, Context, Result};
use kspace_core::model::AdamConfig;
use kspace_core::train::{TrainConfig, DEFAULT_CHECKPOINT_EPOCHS, DEFAULT_SEEDS};
use kspace_core::{Architecture, InputMode, UmapConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Environment variable that replaces the configured seed list.
pub const SEED_ENV: &str = "KSPACE_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeSelection {
    Control,
    Experimental,
    Both,
}

impl ModeSelection {
    pub fn modes(self) -> Vec<InputMode> {
        match self {
            ModeSelection::Control => vec![InputMode::Control],
            ModeSelection::Experimental => vec![InputMode::Experimental],
            ModeSelection::Both => vec![InputMode::Experimental, InputMode::Control],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub image_size: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub checkpoint_epochs: Vec<usize>,
    pub learning_rate: f64,
    pub val_fraction: f64,
    pub seeds: Vec<u64>,
    /// Seed of the train/validation split, shared by every training seed.
    pub split_seed: u64,
    pub arch: Architecture,
    pub umap: UmapConfig,
    pub mode: ModeSelection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            image_size: 64,
            batch_size: 32,
            epochs: 9,
            checkpoint_epochs: DEFAULT_CHECKPOINT_EPOCHS.to_vec(),
            learning_rate: AdamConfig::default().lr,
            val_fraction: 0.2,
            seeds: DEFAULT_SEEDS.to_vec(),
            split_seed: 0,
            arch: Architecture::default(),
            umap: UmapConfig::default(),
            mode: ModeSelection::Both,
        }
    }
}

const TOP_KEYS: &[&str] = &[
    "image_size",
    "batch_size",
    "epochs",
    "checkpoint_epochs",
    "learning_rate",
    "val_fraction",
    "seeds",
    "split_seed",
    "arch",
    "umap",
    "mode",
];
const ARCH_KEYS: &[&str] = &["widths", "hidden"];
const UMAP_KEYS: &[&str] = &[
    "n_neighbors",
    "min_dist",
    "spread",
    "n_epochs",
    "local_connectivity",
    "negative_sample_rate",
    "seed",
];

fn unknown_keys(value: &Value, allowed: &[&str], prefix: &str, out: &mut Vec<String>) {
    if let Value::Object(map) = value {
        out.extend(
            map.keys()
                .filter(|k| !allowed.contains(&k.as_str()))
                .map(|k| format!("{prefix}{k}")),
        );
    }
}

impl RunConfig {
    /// Parse a JSON document, rejecting unknown keys (all of them are listed)
    /// and invalid values.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).context("config is not valid JSON")?;
        if !value.is_object() {
            bail!("config must be a JSON object");
        }
        let mut unknown = Vec::new();
        unknown_keys(&value, TOP_KEYS, "", &mut unknown);
        if let Some(arch) = value.get("arch") {
            unknown_keys(arch, ARCH_KEYS, "arch.", &mut unknown);
        }
        if let Some(umap) = value.get("umap") {
            unknown_keys(umap, UMAP_KEYS, "umap.", &mut unknown);
        }
        if !unknown.is_empty() {
            bail!("unknown config keys: {}", unknown.join(", "));
        }
        let config: RunConfig = serde_json::from_value(value).context("invalid config value")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in config {}", path.display()))
    }

    /// Load `path` if given, otherwise defaults; then apply [`SEED_ENV`].
    pub fn resolve(path: Option<&Path>) -> Result<Self> {
        let mut config = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Ok(raw) = std::env::var(SEED_ENV) {
            config.seeds = parse_seed_list(&raw)
                .with_context(|| format!("{SEED_ENV}={raw:?} is not a seed list"))?;
            config.validate()?;
        }
        Ok(config)
    }

    /// Check every field, reporting all offending keys at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !self.image_size.is_power_of_two() || self.image_size < 8 {
            bad.push(format!("image_size: {} is not a power of two >= 8", self.image_size));
        }
        if self.batch_size == 0 {
            bad.push("batch_size: must be at least 1".to_string());
        }
        if self.epochs == 0 {
            bad.push("epochs: must be at least 1".to_string());
        }
        if let Some(e) = self.checkpoint_epochs.iter().find(|&&e| e == 0 || e > self.epochs) {
            bad.push(format!("checkpoint_epochs: {e} outside 1..={}", self.epochs));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            bad.push(format!("learning_rate: {} is not positive", self.learning_rate));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            bad.push(format!("val_fraction: {} outside (0, 1)", self.val_fraction));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if self.seeds.is_empty() || seeds.len() != self.seeds.len() {
            bad.push(format!("seeds: {:?} must be non-empty and distinct", self.seeds));
        }
        if self.arch.widths.contains(&0) || self.arch.hidden == 0 {
            bad.push("arch: widths and hidden must be positive".to_string());
        }
        if let Err(e) = self.umap.validate() {
            bad.push(format!("umap: {e}"));
        }
        if !bad.is_empty() {
            bail!("invalid config:\n  {}", bad.join("\n  "));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            checkpoint_epochs: self.checkpoint_epochs.clone(),
            adam: AdamConfig {
                lr: self.learning_rate,
                ..AdamConfig::default()
            },
            arch: self.arch,
        }
    }
}

/// Parse `"3"` or `"1,2,3"`.
pub fn parse_seed_list(raw: &str) -> Result<Vec<u64>> {
    raw.split(',')
        .map(|s| s.trim().parse::<u64>().map_err(Into::into))
        .collect()
}
