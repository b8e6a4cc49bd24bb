use rand::Rng;

use super::loss::{utterance_objective, utterance_objective_grad};
use super::similarity::similarity_loss;
use crate::models::{ModelConfig, ModelError, MosNet, SimilarityNet};
use crate::nn::gradcheck::{finite_difference, max_relative_error};
use crate::nn::{Mode, Module, Tensor};
use crate::rng::{stream, Rng64};

fn flat_get<M: Module<f64>>(m: &M, mut i: usize) -> f64 {
    for (_, p) in m.params() {
        if i < p.value.len() {
            return p.value.data()[i];
        }
        i -= p.value.len();
    }
    panic!("slot out of range")
}

fn flat_set<M: Module<f64>>(m: &mut M, mut i: usize, v: f64) {
    for p in m.params_mut() {
        if i < p.value.len() {
            p.value.data_mut()[i] = v;
            return;
        }
        i -= p.value.len();
    }
    panic!("slot out of range")
}

fn randomize_biases<M: Module<f64>>(m: &mut M, rng: &mut Rng64) {
    for p in m.params_mut() {
        if p.shape().len() == 1 {
            p.value
                .data_mut()
                .iter_mut()
                .for_each(|v| *v += rng.random_range(-0.3..0.3));
        }
    }
}

fn spectrogram_like(rng: &mut Rng64, frames: usize, bins: usize) -> Tensor<f64> {
    let data = (0..frames * bins).map(|_| rng.random_range(0.0..1.0)).collect();
    Tensor::from_vec(&[frames, bins], data).expect("sized")
}

/// Checks the analytic gradient of the objective with respect to every
/// parameter of a whole MOS network against central differences, in train
/// mode with a fixed dropout mask. Returns the largest relative error.
pub fn model_grad_check(
    config: &ModelConfig,
    frames: usize,
    valid_len: usize,
    alpha: f64,
    seed: u64,
) -> Result<f64, ModelError> {
    let mut rng = stream(seed, "model-grad-check", 0);
    let mut model = MosNet::<f64>::new(config.clone(), &mut rng)?;
    randomize_biases(&mut model, &mut rng);
    let x = spectrogram_like(&mut rng, frames, config.n_bins);
    let mask_rng = || stream(seed, "model-grad-check-mask", 0);

    let mut r = mask_rng();
    let (pred, tape) = model.forward(&x, valid_len, &mut Mode::Train(&mut r))?;
    // A target near the prediction keeps the loss, and with it the rounding
    // noise of the finite differences, small.
    let target = pred.utterance_score + rng.random_range(-0.5..0.5);
    let mut grads = model.zero_grads();
    model.backward(&tape, &utterance_objective_grad(&pred, target, alpha, 1), &mut grads);
    let analytic: Vec<f64> = grads.0.iter().flat_map(|g| g.data().to_vec()).collect();

    let n = analytic.len();
    let numeric = finite_difference(&mut model, n, flat_get, flat_set, |m| {
        let mut r = mask_rng();
        let (p, _) = m.forward(&x, valid_len, &mut Mode::Train(&mut r)).expect("valid");
        utterance_objective(&p, target, alpha)
    });
    Ok(max_relative_error(&analytic, &numeric))
}

/// As [`model_grad_check`] for a similarity network and its cross-entropy.
pub fn similarity_grad_check(config: &ModelConfig, frames: [usize; 2], seed: u64) -> Result<f64, ModelError> {
    let mut rng = stream(seed, "similarity-grad-check", 0);
    let mut model = SimilarityNet::<f64>::new(config.clone(), &mut rng)?;
    randomize_biases(&mut model, &mut rng);
    let a = spectrogram_like(&mut rng, frames[0], config.n_bins);
    let b = spectrogram_like(&mut rng, frames[1], config.n_bins);
    let label = u8::from(rng.random_bool(0.5));
    let head = model.head();
    let mask_rng = || stream(seed, "similarity-grad-check-mask", 0);

    let mut r = mask_rng();
    let (out, tape) = model.forward(&a, frames[0], &b, frames[1], &mut Mode::Train(&mut r))?;
    let (_, d) = similarity_loss(head, &out.logits, label);
    let mut grads = model.zero_grads();
    model.backward(&tape, &d, &mut grads);
    let analytic: Vec<f64> = grads.0.iter().flat_map(|g| g.data().to_vec()).collect();

    let n = analytic.len();
    let numeric = finite_difference(&mut model, n, flat_get, flat_set, |m| {
        let mut r = mask_rng();
        let (o, _) = m
            .forward(&a, frames[0], &b, frames[1], &mut Mode::Train(&mut r))
            .expect("valid");
        similarity_loss(head, &o.logits, label).0
    });
    Ok(max_relative_error(&analytic, &numeric))
}
