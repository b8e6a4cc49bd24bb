use std::time::Instant;

use rayon::prelude::*;

use super::batch::{make_batches, Example};
use super::early_stop::{EarlyStopping, StopDecision};
use super::loss::{utterance_objective, utterance_objective_grad};
use super::TrainError;
use crate::models::{ModelError, MosNet};
use crate::nn::{Adam, Grads, Mode, Module, Real, Tensor};
use crate::rng::{stream, Rng64};

/// Utterances per gradient-accumulation chunk. Fixed so that the summation
/// order, and therefore the result, does not depend on the thread count.
const CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    /// Weight of the frame-level term.
    pub alpha: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience_epochs: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// When off, padded frames are scored, pooled and penalised like real ones.
    pub mask_padding: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            batch_size: 64,
            learning_rate: 1e-4,
            patience_epochs: 5,
            max_epochs: 100,
            seed: 0,
            mask_padding: true,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be a finite value >= 0, got {}", self.alpha));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.patience_epochs == 0 {
            return bad("patience_epochs must be at least 1".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean training objective over the epoch's batches (train mode).
    pub objective: f64,
    pub val_mse: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    Patience,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::MaxEpochs => "max_epochs",
            StopReason::Patience => "patience",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

impl TrainingHistory {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch - 1]
    }

    /// CSV with header `epoch,objective,val_mse[,wall_time_s]`. Leaving the
    /// timing column out makes the file reproducible across runs.
    pub fn to_csv(&self, with_timing: bool) -> String {
        let mut out = String::from("epoch,objective,val_mse");
        out.push_str(if with_timing { ",wall_time_s\n" } else { "\n" });
        for r in &self.epochs {
            out.push_str(&format!("{},{:.9e},{:.9e}", r.epoch, r.objective, r.val_mse));
            if with_timing {
                out.push_str(&format!(",{:.3}", r.wall_time_s));
            }
            out.push('\n');
        }
        out
    }
}

/// Shared epoch loop. `epoch_items` returns the batches of one epoch;
/// `item_step` runs forward and backward for one item and returns its
/// un-normalised loss; `validate` scores the whole validation set.
pub(crate) fn fit<F, M, W>(
    mut model: M,
    cfg: &TrainingConfig,
    n_train: usize,
    epoch_items: impl Fn(&mut Rng64) -> Vec<Vec<W>>,
    item_step: impl Fn(&M, &W, &mut Mode<'_>, usize, &mut Grads<F>) -> Result<f64, ModelError> + Sync,
    validate: impl Fn(&M) -> Result<f64, ModelError>,
) -> Result<(M, TrainingHistory), TrainError>
where
    F: Real,
    M: Module<F> + Clone + Sync,
    W: Sync,
{
    cfg.validate()?;
    let adam = Adam::with_learning_rate(cfg.learning_rate);
    let mut stopper = EarlyStopping::new(cfg.patience_epochs);
    let mut best_model = model.clone();
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        let batches = epoch_items(&mut stream(cfg.seed, "shuffle", epoch as u64));
        let mut total = 0.0;
        for (b, batch) in batches.iter().enumerate() {
            let chunk_results: Vec<Result<(f64, Grads<F>), ModelError>> = batch
                .par_chunks(CHUNK)
                .enumerate()
                .map(|(c, items)| {
                    let mut grads = model.zero_grads();
                    let mut loss = 0.0;
                    for (k, item) in items.iter().enumerate() {
                        let key = ((epoch as u64) << 40) | ((b as u64) << 20) | (c * CHUNK + k) as u64;
                        let mut rng = stream(cfg.seed, "dropout", key);
                        loss += item_step(&model, item, &mut Mode::Train(&mut rng), batch.len(), &mut grads)?;
                    }
                    Ok((loss, grads))
                })
                .collect();
            let mut grads = model.zero_grads();
            let mut batch_loss = 0.0;
            for r in chunk_results {
                let (l, g) = r?;
                batch_loss += l;
                grads.add_assign(&g);
            }
            if !batch_loss.is_finite() || !grads.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    batch: b + 1,
                    loss: batch_loss / batch.len() as f64,
                });
            }
            total += batch_loss;
            model.load_grads(&grads);
            adam.step(model.params_mut());
        }
        let objective = total / n_train as f64;
        let val_mse = validate(&model)?;
        if !val_mse.is_finite() {
            return Err(TrainError::Diverged {
                epoch,
                batch: 0,
                loss: val_mse,
            });
        }
        epochs.push(EpochRecord {
            epoch,
            objective,
            val_mse,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
        log::info!("epoch {epoch}: objective {objective:.5}, validation mse {val_mse:.5}");
        match stopper.update(epoch, val_mse) {
            StopDecision::Improved => best_model = model.clone(),
            StopDecision::NoImprovement => {}
            StopDecision::Stop => {
                stop_reason = StopReason::Patience;
                break;
            }
        }
    }
    Ok((
        best_model,
        TrainingHistory {
            epochs,
            best_epoch: stopper.best_epoch(),
            stop_reason,
        },
    ))
}

/// One padded batch member as seen by the optimizer.
struct PaddedItem<F> {
    features: Tensor<F>,
    valid_len: usize,
    target: F,
}

fn check_set<F: Real>(set: &[Example<F>], which: &'static str, n_bins: usize) -> Result<(), TrainError> {
    if set.is_empty() {
        return Err(TrainError::EmptySet(which));
    }
    for ex in set {
        if ex.features.shape().len() != 2 || ex.features.dim(1) != n_bins || ex.n_frames() == 0 {
            return Err(TrainError::Model(ModelError::BinMismatch {
                expected: n_bins,
                got: ex.features.shape().get(1).copied().unwrap_or(0),
            }));
        }
    }
    Ok(())
}

/// Trains `model` with Adam on the combined objective, early-stopping on
/// validation utterance MSE and returning the best-epoch weights.
pub fn train<F: Real>(
    model: MosNet<F>,
    train_set: &[Example<F>],
    val_set: &[Example<F>],
    cfg: &TrainingConfig,
) -> Result<(MosNet<F>, TrainingHistory), TrainError> {
    let n_bins = model.config().n_bins;
    check_set(train_set, "training", n_bins)?;
    check_set(val_set, "validation", n_bins)?;
    let overlap = train_set
        .iter()
        .filter(|t| val_set.iter().any(|v| v.id == t.id))
        .count();
    if overlap > 0 {
        log::warn!("{overlap} utterances appear in both the training and validation sets");
    }
    let alpha = F::lit(cfg.alpha);
    let mask = cfg.mask_padding;
    fit(
        model,
        cfg,
        train_set.len(),
        |rng| {
            make_batches(train_set, cfg.batch_size, rng)
                .into_iter()
                .map(|batch| {
                    let t = batch.padded_len();
                    (0..batch.len())
                        .map(|i| PaddedItem {
                            features: batch.item(i),
                            valid_len: if mask { batch.valid_lens[i] } else { t },
                            target: batch.targets[i],
                        })
                        .collect()
                })
                .collect()
        },
        |m: &MosNet<F>, item: &PaddedItem<F>, mode, batch_size, grads| {
            let (pred, tape) = m.forward(&item.features, item.valid_len, mode)?;
            let d = utterance_objective_grad(&pred, item.target, alpha, batch_size);
            m.backward(&tape, &d, grads);
            Ok(utterance_objective(&pred, item.target, alpha).as_f64())
        },
        |m| validation_mse(m, val_set),
    )
}

/// Eval-mode pooled predictions, one per example.
pub fn predict_set<F: Real>(model: &MosNet<F>, set: &[Example<F>]) -> Result<Vec<f64>, ModelError> {
    set.par_iter()
        .map(|ex| Ok(model.predict(&ex.features, ex.n_frames())?.utterance_score.as_f64()))
        .collect()
}

/// Utterance-level MSE of eval-mode predictions.
pub fn validation_mse<F: Real>(model: &MosNet<F>, set: &[Example<F>]) -> Result<f64, ModelError> {
    let preds = predict_set(model, set)?;
    Ok(preds
        .iter()
        .zip(set)
        .map(|(p, ex)| (p - ex.target.as_f64()).powi(2))
        .sum::<f64>()
        / set.len() as f64)
}

/// The objective over `set` in eval mode, each utterance unpadded.
pub fn evaluate_objective<F: Real>(model: &MosNet<F>, set: &[Example<F>], alpha: f64) -> Result<f64, ModelError> {
    let terms: Vec<f64> = set
        .par_iter()
        .map(|ex| {
            let pred = model.predict(&ex.features, ex.n_frames())?;
            Ok(utterance_objective(&pred, ex.target, F::lit(alpha)).as_f64())
        })
        .collect::<Result<_, ModelError>>()?;
    Ok(terms.iter().sum::<f64>() / set.len().max(1) as f64)
}
