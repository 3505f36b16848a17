//! Labeled image datasets: directory ingestion, a synthetic band-limited
//! generator, stratified splitting and batch assembly.

mod batch;
mod ingest;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{seeded_rng, Tensor};
use crate::spectral::{kspace_features, ChannelStats, Standardizer};

pub use batch::{batches, Batch, Batches};
pub use ingest::{decode_gray, export_png_tree, load_dataset, resize_bilinear};
pub use synth::{band_of_radius, band_radius_limits, synth_dataset, wrapped_radius};

pub const NUM_CLASSES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiagnosticClass {
    MildDemented = 0,
    ModerateDemented = 1,
    NonDemented = 2,
    VeryMildDemented = 3,
}

impl DiagnosticClass {
    pub const ALL: [DiagnosticClass; NUM_CLASSES] = [
        DiagnosticClass::MildDemented,
        DiagnosticClass::ModerateDemented,
        DiagnosticClass::NonDemented,
        DiagnosticClass::VeryMildDemented,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    /// Directory name used by the public dataset.
    pub fn name(self) -> &'static str {
        match self {
            DiagnosticClass::MildDemented => "MildDemented",
            DiagnosticClass::ModerateDemented => "ModerateDemented",
            DiagnosticClass::NonDemented => "NonDemented",
            DiagnosticClass::VeryMildDemented => "VeryMildDemented",
        }
    }

    /// Matches a directory name case-insensitively, ignoring `_`, `-` and
    /// spaces (`Mild_Demented`, `mild demented`, ...).
    pub fn from_dir_name(name: &str) -> Option<Self> {
        let key: String = name
            .chars()
            .filter(|c| !matches!(c, '_' | '-' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        Self::ALL
            .into_iter()
            .find(|c| c.name().to_ascii_lowercase() == key)
    }
}

impl fmt::Display for DiagnosticClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DiagnosticClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_dir_name(s)
            .or_else(|| s.parse::<usize>().ok().and_then(Self::from_code))
            .ok_or_else(|| Error::Argument(format!("unknown diagnostic class {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    /// Square `H x W` grayscale image with values in `[0, 1]`.
    pub image: Tensor,
    pub label: DiagnosticClass,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Validation,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Validation => "validation",
        }
    }
}

/// Ordered samples with split tags and train-split channel statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    split: Vec<SplitTag>,
    channel_stats: ChannelStats,
}

impl Dataset {
    /// Wraps samples as an all-train dataset. Ids must be unique and every
    /// image square with a power-of-two side shared by all samples.
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let split = vec![SplitTag::Train; samples.len()];
        Self::with_split(samples, split)
    }

    fn with_split(samples: Vec<Sample>, split: Vec<SplitTag>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Argument("dataset has no samples".into()));
        }
        let mut ids: Vec<&str> = samples.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Argument(format!("duplicate sample id {:?}", w[0])));
        }
        let shape = samples[0].image.shape().to_vec();
        match shape[..] {
            [h, w] if h == w && h.is_power_of_two() => {}
            _ => {
                return Err(Error::Dimension(format!(
                    "images must be square with a power-of-two side, got {shape:?}"
                )))
            }
        }
        if let Some(s) = samples.iter().find(|s| s.image.shape() != shape.as_slice()) {
            return Err(Error::Shape(format!(
                "sample {} has shape {:?}, expected {shape:?}",
                s.id,
                s.image.shape()
            )));
        }
        let channel_stats = train_channel_stats(&samples, &split)?;
        Ok(Self {
            samples,
            split,
            channel_stats,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn image_size(&self) -> usize {
        self.samples[0].image.shape()[0]
    }

    pub fn split_tags(&self) -> &[SplitTag] {
        &self.split
    }

    pub fn tag(&self, index: usize) -> SplitTag {
        self.split[index]
    }

    pub fn channel_stats(&self) -> &ChannelStats {
        &self.channel_stats
    }

    /// Indices of samples carrying `tag`, in dataset order.
    pub fn indices(&self, tag: SplitTag) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == tag).collect()
    }

    pub fn class_counts(&self, tag: Option<SplitTag>) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for (s, t) in self.samples.iter().zip(&self.split) {
            if tag.is_none_or(|tag| tag == *t) {
                counts[s.label.code()] += 1;
            }
        }
        counts
    }

    /// Stratified train/validation split.
    ///
    /// For each class, `floor(count * val_fraction)` samples picked by a
    /// seeded shuffle go to validation. Channel statistics are recomputed
    /// from the resulting train split.
    pub fn split(&self, val_fraction: f64, seed: u64) -> Result<Dataset> {
        if !(val_fraction > 0.0 && val_fraction < 1.0) {
            return Err(Error::Argument(format!(
                "val_fraction must lie in (0, 1), got {val_fraction}"
            )));
        }
        let mut rng = seeded_rng(seed);
        let mut split = vec![SplitTag::Train; self.len()];
        for class in DiagnosticClass::ALL {
            let mut members: Vec<usize> = (0..self.len())
                .filter(|&i| self.samples[i].label == class)
                .collect();
            if members.len() < 2 {
                return Err(Error::Split(format!(
                    "class {class} has {} samples; at least 2 are needed",
                    members.len()
                )));
            }
            rng.shuffle(&mut members);
            let n_val = (members.len() as f64 * val_fraction).floor() as usize;
            for &i in &members[..n_val] {
                split[i] = SplitTag::Validation;
            }
        }
        Self::with_split(self.samples.clone(), split)
    }
}

/// Equivalent to `dataset.split(val_fraction, seed)`.
pub fn split(dataset: &Dataset, val_fraction: f64, seed: u64) -> Result<Dataset> {
    dataset.split(val_fraction, seed)
}

fn train_channel_stats(samples: &[Sample], split: &[SplitTag]) -> Result<ChannelStats> {
    let mut real = Vec::new();
    let mut imag = Vec::new();
    for (s, t) in samples.iter().zip(split) {
        if *t == SplitTag::Train {
            let k = kspace_features(&s.image)?;
            real.extend_from_slice(k.real.data());
            imag.extend_from_slice(k.imag.data());
        }
    }
    Ok(ChannelStats {
        real: Standardizer::fit(&real),
        imag: Standardizer::fit(&imag),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(per_class: usize) -> Dataset {
        let mut samples = Vec::new();
        for class in DiagnosticClass::ALL {
            for j in 0..per_class {
                samples.push(Sample {
                    id: format!("{class}/{j}"),
                    image: Tensor::filled(&[4, 4], (j as f64 + 1.0) / (per_class as f64 + 1.0)),
                    label: class,
                });
            }
        }
        Dataset::new(samples).unwrap()
    }

    #[test]
    fn class_names_round_trip() {
        for c in DiagnosticClass::ALL {
            assert_eq!(DiagnosticClass::from_dir_name(c.name()), Some(c));
            assert_eq!(DiagnosticClass::from_code(c.code()), Some(c));
        }
        assert_eq!(
            DiagnosticClass::from_dir_name("Very_Mild_Demented"),
            Some(DiagnosticClass::VeryMildDemented)
        );
        assert_eq!(
            DiagnosticClass::from_dir_name("nondemented"),
            Some(DiagnosticClass::NonDemented)
        );
        assert_eq!(DiagnosticClass::from_dir_name("Other"), None);
    }

    #[test]
    fn stratified_split_proportions() {
        let d = fixture(100).split(0.2, 9).unwrap();
        assert_eq!(d.class_counts(Some(SplitTag::Validation)), [20; 4]);
        assert_eq!(d.class_counts(Some(SplitTag::Train)), [80; 4]);
    }

    #[test]
    fn split_is_seeded() {
        let base = fixture(10);
        assert_eq!(base.split(0.3, 4).unwrap(), base.split(0.3, 4).unwrap());
        assert_ne!(
            base.split(0.3, 4).unwrap().split_tags(),
            base.split(0.3, 5).unwrap().split_tags()
        );
    }

    #[test]
    fn half_split_of_two_per_class() {
        let d = fixture(2).split(0.5, 1).unwrap();
        assert_eq!(d.class_counts(Some(SplitTag::Validation)), [1; 4]);
    }

    #[test]
    fn split_rejects_tiny_classes_and_bad_fractions() {
        let d = fixture(1);
        assert!(matches!(d.split(0.5, 0), Err(Error::Split(_))));
        let d = fixture(4);
        assert!(d.split(0.0, 0).is_err());
        assert!(d.split(1.0, 0).is_err());
    }

    #[test]
    fn stats_come_from_train_split() {
        let d = fixture(10).split(0.5, 3).unwrap();
        let train: Vec<Sample> = d
            .indices(SplitTag::Train)
            .into_iter()
            .map(|i| d.samples()[i].clone())
            .collect();
        let only_train = Dataset::new(train).unwrap();
        assert_eq!(d.channel_stats(), only_train.channel_stats());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let s = Sample {
            id: "a".into(),
            image: Tensor::zeros(&[4, 4]),
            label: DiagnosticClass::NonDemented,
        };
        assert!(Dataset::new(vec![s.clone(), s]).is_err());
    }
}
