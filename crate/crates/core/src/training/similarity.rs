use rayon::prelude::*;

use super::trainer::{fit, TrainingConfig, TrainingHistory};
use super::TrainError;
use crate::models::{ModelError, SimilarityHead, SimilarityNet};
use crate::nn::{Real, Tensor};

/// Two utterances' features and whether they share a speaker (1) or not (0).
#[derive(Debug, Clone)]
pub struct PairExample<F> {
    pub a: Tensor<F>,
    pub b: Tensor<F>,
    pub label: u8,
}

/// Cross-entropy of the head's output against `label`, with its gradient
/// with respect to the logits. The scalar head uses binary cross-entropy on
/// the logistic output, the 2-class head softmax cross-entropy.
pub fn similarity_loss(head: SimilarityHead, logits: &[f64], label: u8) -> (f64, Vec<f64>) {
    let y = f64::from(label);
    match head {
        SimilarityHead::Scalar => {
            let z = logits[0];
            let loss = z.max(0.0) - y * z + (-z.abs()).exp().ln_1p();
            let p = 1.0 / (1.0 + (-z).exp());
            (loss, vec![p - y])
        }
        SimilarityHead::TwoClass => {
            let m = logits[0].max(logits[1]);
            let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
            let loss = lse - logits[usize::from(label)];
            let grads = (0..2)
                .map(|k| (logits[k] - lse).exp() - f64::from(u8::from(k == usize::from(label))))
                .collect();
            (loss, grads)
        }
    }
}

fn batches<T: Clone>(items: &[T], batch_size: usize, rng: &mut crate::rng::Rng64) -> Vec<Vec<T>> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(rng);
    order
        .chunks(batch_size)
        .map(|c| c.iter().map(|&i| items[i].clone()).collect())
        .collect()
}

/// Probability of "same speaker" for every pair, eval mode.
pub fn predict_pairs<F: Real>(model: &SimilarityNet<F>, pairs: &[PairExample<F>]) -> Result<Vec<f64>, ModelError> {
    pairs
        .par_iter()
        .map(|p| {
            Ok(model
                .predict(&p.a, p.a.dim(0), &p.b, p.b.dim(0))?
                .same_probability()
                .as_f64())
        })
        .collect()
}

/// Trains a similarity network with the same loop as the MOS models; the
/// validation criterion is the MSE between predicted probability and label.
pub fn train_similarity<F: Real>(
    model: SimilarityNet<F>,
    train_set: &[PairExample<F>],
    val_set: &[PairExample<F>],
    cfg: &TrainingConfig,
) -> Result<(SimilarityNet<F>, TrainingHistory), TrainError> {
    if train_set.is_empty() {
        return Err(TrainError::EmptySet("training"));
    }
    if val_set.is_empty() {
        return Err(TrainError::EmptySet("validation"));
    }
    if let Some(p) = train_set.iter().chain(val_set).find(|p| p.label > 1) {
        return Err(TrainError::InvalidConfig(format!(
            "pair label {} is not 0 or 1",
            p.label
        )));
    }
    let indices: Vec<usize> = (0..train_set.len()).collect();
    fit(
        model,
        cfg,
        train_set.len(),
        |rng| batches(&indices, cfg.batch_size, rng),
        |m: &SimilarityNet<F>, &i: &usize, mode, batch_size, grads| {
            let pair = &train_set[i];
            let (out, tape) = m.forward(&pair.a, pair.a.dim(0), &pair.b, pair.b.dim(0), mode)?;
            let logits: Vec<f64> = out.logits.iter().map(|z| z.as_f64()).collect();
            let (loss, d) = similarity_loss(m.head(), &logits, pair.label);
            let d: Vec<F> = d.iter().map(|g| F::lit(g / batch_size as f64)).collect();
            m.backward(&tape, &d, grads);
            Ok(loss)
        },
        |m| {
            let probs = predict_pairs(m, val_set)?;
            Ok(probs
                .iter()
                .zip(val_set)
                .map(|(p, pair)| (p - f64::from(pair.label)).powi(2))
                .sum::<f64>()
                / val_set.len() as f64)
        },
    )
}
