use super::TrainError;
use crate::models::MosPrediction;
use crate::nn::Real;

/// One utterance's share of the objective:
/// `(Q_hat - Q)^2 + (alpha / T) * sum_t (Q_hat - q_t)^2` over the first
/// `T = valid_len` frames, where `Q_hat` is the ground truth, `Q` the pooled
/// prediction and `q_t` the frame scores.
pub fn utterance_objective<F: Real>(pred: &MosPrediction<F>, target: F, alpha: F) -> F {
    let t = pred.valid_len;
    let utter = (target - pred.utterance_score).powi(2);
    let frame: F = pred.frame_scores[..t].iter().map(|&q| (target - q).powi(2)).sum();
    utter + alpha * frame / F::lit(t as f64)
}

/// Gradient of `utterance_objective / batch_size` with respect to every
/// frame score; entries past `valid_len` are zero.
pub fn utterance_objective_grad<F: Real>(pred: &MosPrediction<F>, target: F, alpha: F, batch_size: usize) -> Vec<F> {
    let t = pred.valid_len;
    let scale = F::lit(2.0 / (batch_size as f64 * t as f64));
    let pooled_term = pred.utterance_score - target;
    pred.frame_scores
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            if i < t {
                scale * (pooled_term + alpha * (q - target))
            } else {
                F::zero()
            }
        })
        .collect()
}

/// Combined utterance- and frame-level objective averaged over the batch.
pub fn mosnet_loss<F: Real>(predictions: &[MosPrediction<F>], ground_truth: &[F], alpha: F) -> Result<F, TrainError> {
    if predictions.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    if predictions.len() != ground_truth.len() {
        return Err(TrainError::LengthMismatch {
            predictions: predictions.len(),
            targets: ground_truth.len(),
        });
    }
    let total: F = predictions
        .iter()
        .zip(ground_truth)
        .map(|(p, &y)| utterance_objective(p, y, alpha))
        .sum();
    Ok(total / F::lit(predictions.len() as f64))
}
