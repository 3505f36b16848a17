use crate::error::{Error, Result};
use crate::numerics::{seeded_rng, Tensor};
use crate::spectral::{assemble_channels, InputMode};

use super::{Dataset, SplitTag};

/// One mini-batch: `B x C x H x W` inputs plus integer labels.
#[derive(Clone, Debug)]
pub struct Batch {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
    /// Dataset indices of the rows, in order.
    pub indices: Vec<usize>,
}

/// Lazily assembled batches over one split.
pub struct Batches<'a> {
    dataset: &'a Dataset,
    order: Vec<usize>,
    batch_size: usize,
    mode: InputMode,
    cursor: usize,
}

/// Batches over `split_tag`. Train order is reshuffled from `seed`;
/// validation keeps dataset order. The last partial batch is kept.
pub fn batches(
    dataset: &Dataset,
    split_tag: SplitTag,
    batch_size: usize,
    mode: InputMode,
    seed: u64,
) -> Result<Batches<'_>> {
    if batch_size == 0 {
        return Err(Error::Argument("batch_size must be at least 1".into()));
    }
    let mut order = dataset.indices(split_tag);
    if order.is_empty() {
        return Err(Error::Argument(format!(
            "the {} split is empty",
            split_tag.as_str()
        )));
    }
    if split_tag == SplitTag::Train {
        seeded_rng(seed).shuffle(&mut order);
    }
    Ok(Batches {
        dataset,
        order,
        batch_size,
        mode,
        cursor: 0,
    })
}

impl Batches<'_> {
    pub fn num_batches(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    fn assemble(&self, indices: &[usize]) -> Result<Batch> {
        let size = self.dataset.image_size();
        let c = self.mode.channels();
        let mut data = Vec::with_capacity(indices.len() * c * size * size);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let s = &self.dataset.samples()[i];
            let stack = assemble_channels(&s.image, self.mode, Some(self.dataset.channel_stats()))?;
            data.extend_from_slice(stack.channels.data());
            labels.push(s.label.code());
        }
        Ok(Batch {
            inputs: Tensor::new(&[indices.len(), c, size, size], data)?,
            labels,
            indices: indices.to_vec(),
        })
    }
}

impl Iterator for Batches<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.cursor >= self.order.len() {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let idx = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        // Channel statistics always exist and images were validated at
        // dataset construction, so assembly cannot fail here.
        Some(self.assemble(&idx).expect("batch assembly"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_dataset, DiagnosticClass, Sample};

    fn ten_samples() -> Dataset {
        let samples = (0..10)
            .map(|i| Sample {
                id: format!("s{i}"),
                image: Tensor::filled(&[4, 4], i as f64 / 10.0),
                label: DiagnosticClass::from_code(i % 4).unwrap(),
            })
            .collect();
        Dataset::new(samples).unwrap()
    }

    #[test]
    fn partial_last_batch_is_kept() {
        let d = ten_samples();
        let sizes: Vec<usize> = batches(&d, SplitTag::Train, 4, InputMode::Control, 0)
            .unwrap()
            .map(|b| b.labels.len())
            .collect();
        assert_eq!(sizes, vec![4, 4, 2]);
    }

    #[test]
    fn validation_order_is_fixed() {
        let d = synth_dataset(16, 16, 0.0, 1).unwrap().split(0.5, 2).unwrap();
        let a: Vec<Vec<usize>> = batches(&d, SplitTag::Validation, 3, InputMode::Control, 1)
            .unwrap()
            .map(|b| b.indices)
            .collect();
        let b: Vec<Vec<usize>> = batches(&d, SplitTag::Validation, 3, InputMode::Control, 99)
            .unwrap()
            .map(|b| b.indices)
            .collect();
        assert_eq!(a, b);
        assert_eq!(a.concat(), d.indices(SplitTag::Validation));
    }

    #[test]
    fn experimental_batches_have_three_channels() {
        let d = synth_dataset(8, 16, 0.0, 1).unwrap();
        for b in batches(&d, SplitTag::Train, 3, InputMode::Experimental, 5).unwrap() {
            assert_eq!(b.inputs.shape()[1], 3);
        }
    }

    #[test]
    fn epoch_covers_split_exactly_once() {
        let d = ten_samples();
        let mut seen: Vec<usize> = batches(&d, SplitTag::Train, 3, InputMode::Control, 7)
            .unwrap()
            .flat_map(|b| b.indices)
            .collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn empty_split_and_zero_batch_rejected() {
        let d = ten_samples();
        assert!(batches(&d, SplitTag::Validation, 4, InputMode::Control, 0).is_err());
        assert!(batches(&d, SplitTag::Train, 0, InputMode::Control, 0).is_err());
    }
}
