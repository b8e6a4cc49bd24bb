use rand::Rng;

use super::{Real, Tensor};
use crate::rng::Rng64;

/// Forward mode. Training mode carries the generator for dropout masks.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut Rng64),
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

pub fn relu<F: Real>(x: &Tensor<F>) -> Tensor<F> {
    x.map(|v| if v > F::zero() { v } else { F::zero() })
}

/// Gradient of [`relu`] given its output.
pub fn relu_backward<F: Real>(output: &Tensor<F>, d_out: &Tensor<F>) -> Tensor<F> {
    let data = output
        .data()
        .iter()
        .zip(d_out.data())
        .map(|(&y, &d)| if y > F::zero() { d } else { F::zero() })
        .collect();
    Tensor::from_vec(output.shape(), data).expect("same shape")
}

/// Inverted dropout. Returns the output and, in training mode, the
/// per-element multiplier (`0` or `1 / (1 - rate)`).
pub fn dropout<F: Real>(x: &Tensor<F>, rate: f64, mode: &mut Mode<'_>) -> (Tensor<F>, Option<Vec<F>>) {
    assert!((0.0..1.0).contains(&rate), "dropout rate must lie in [0, 1)");
    match mode {
        Mode::Eval => (x.clone(), None),
        Mode::Train(_) if rate == 0.0 => (x.clone(), None),
        Mode::Train(rng) => {
            let keep = 1.0 - rate;
            let scale = F::lit(1.0 / keep);
            let mask: Vec<F> = (0..x.len())
                .map(|_| if rng.random::<f64>() < keep { scale } else { F::zero() })
                .collect();
            let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
            (Tensor::from_vec(x.shape(), data).expect("same shape"), Some(mask))
        }
    }
}

pub fn dropout_backward<F: Real>(mask: Option<&[F]>, d_out: &Tensor<F>) -> Tensor<F> {
    match mask {
        None => d_out.clone(),
        Some(m) => {
            let data = d_out.data().iter().zip(m).map(|(&d, &k)| d * k).collect();
            Tensor::from_vec(d_out.shape(), data).expect("same shape")
        }
    }
}

/// Mean over the first `valid_len` entries of a `[N x 1]` score column.
pub fn mean_pool_time<F: Real>(frame_scores: &[F], valid_len: usize) -> F {
    assert!(
        valid_len >= 1 && valid_len <= frame_scores.len(),
        "valid_len {} outside 1..={}",
        valid_len,
        frame_scores.len()
    );
    let sum: F = frame_scores[..valid_len].iter().copied().sum();
    sum / F::lit(valid_len as f64)
}

/// Gradient of [`mean_pool_time`] with respect to each frame score.
pub fn mean_pool_time_backward<F: Real>(n_frames: usize, valid_len: usize, d_pooled: F) -> Vec<F> {
    let share = d_pooled / F::lit(valid_len as f64);
    (0..n_frames)
        .map(|t| if t < valid_len { share } else { F::zero() })
        .collect()
}
