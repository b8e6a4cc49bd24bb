use rand::seq::SliceRandom;
use rand::Rng;

use crate::nn::{Real, Tensor};

/// One utterance ready for training: `[N x bins]` features and its MOS.
#[derive(Debug, Clone)]
pub struct Example<F> {
    pub id: String,
    pub system_id: String,
    pub features: Tensor<F>,
    pub target: F,
}

impl<F: Real> Example<F> {
    pub fn n_frames(&self) -> usize {
        self.features.dim(0)
    }
}

/// Utterances zero-padded in time to the longest member.
#[derive(Debug, Clone)]
pub struct Batch<F> {
    pub indices: Vec<usize>,
    /// `[B x T x bins]`
    pub features: Tensor<F>,
    pub valid_lens: Vec<usize>,
    pub targets: Vec<F>,
}

impl<F: Real> Batch<F> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn padded_len(&self) -> usize {
        self.features.dim(1)
    }

    /// The `b`-th padded utterance, `[T x bins]`.
    pub fn item(&self, b: usize) -> Tensor<F> {
        let (t, bins) = (self.features.dim(1), self.features.dim(2));
        let data = self.features.data()[b * t * bins..(b + 1) * t * bins].to_vec();
        Tensor::from_vec(&[t, bins], data).expect("batch layout")
    }
}

/// Shuffles `dataset` and groups it into zero-padded batches.
pub fn make_batches<F: Real, R: Rng + ?Sized>(dataset: &[Example<F>], batch_size: usize, rng: &mut R) -> Vec<Batch<F>> {
    assert!(batch_size >= 1, "batch size must be positive");
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(rng);
    order
        .chunks(batch_size)
        .map(|idx| {
            let bins = dataset[idx[0]].features.dim(1);
            let t = idx.iter().map(|&i| dataset[i].n_frames()).max().unwrap_or(0);
            let mut data = vec![F::zero(); idx.len() * t * bins];
            for (b, &i) in idx.iter().enumerate() {
                let src = dataset[i].features.data();
                data[b * t * bins..b * t * bins + src.len()].copy_from_slice(src);
            }
            Batch {
                indices: idx.to_vec(),
                features: Tensor::from_vec(&[idx.len(), t, bins], data).expect("batch layout"),
                valid_lens: idx.iter().map(|&i| dataset[i].n_frames()).collect(),
                targets: idx.iter().map(|&i| dataset[i].target).collect(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn example(frames: usize, value: f32) -> Example<f32> {
        Example {
            id: format!("u{frames}"),
            system_id: "s".into(),
            features: Tensor::filled(&[frames, 3], value),
            target: value,
        }
    }

    #[test]
    fn batch_size_one_never_pads() {
        let data: Vec<_> = (1..=6).map(|n| example(n * 3, n as f32)).collect();
        for batch in make_batches(&data, 1, &mut stream(0, "b", 0)) {
            assert_eq!(batch.padded_len(), batch.valid_lens[0]);
        }
    }

    #[test]
    fn batches_pad_to_longest_member() {
        let data = vec![example(10, 1.0), example(25, 2.0)];
        let batches = make_batches(&data, 2, &mut stream(0, "b", 0));
        assert_eq!(batches.len(), 1);
        let b = &batches[0];
        assert_eq!(b.padded_len(), 25);
        let mut lens = b.valid_lens.clone();
        lens.sort();
        assert_eq!(lens, vec![10, 25]);
        let short = b.valid_lens.iter().position(|&l| l == 10).unwrap();
        let item = b.item(short);
        assert!(item.data()[..30].iter().all(|&v| v == 1.0));
        assert!(item.data()[30..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn every_example_appears_once() {
        let data: Vec<_> = (1..=11).map(|n| example(n, n as f32)).collect();
        let batches = make_batches(&data, 4, &mut stream(3, "b", 0));
        assert_eq!(batches.iter().map(Batch::len).collect::<Vec<_>>(), vec![4, 4, 3]);
        let mut seen: Vec<usize> = batches.iter().flat_map(|b| b.indices.clone()).collect();
        seen.sort();
        assert_eq!(seen, (0..11).collect::<Vec<_>>());
    }
}
