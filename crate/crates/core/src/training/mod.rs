//! The combined utterance/frame objective, padded batching, the early-stopped
//! training loop and checkpoint persistence.

mod batch;
mod checkpoint;
mod early_stop;
mod gradcheck;
mod loss;
mod similarity;
mod trainer;

pub use batch::{make_batches, Batch, Example};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_as, save_checkpoint, CheckpointError,
    FORMAT_VERSION, MAGIC,
};
pub use early_stop::{EarlyStopping, StopDecision};
pub use gradcheck::{model_grad_check, similarity_grad_check};
pub use loss::{mosnet_loss, utterance_objective, utterance_objective_grad};
pub use similarity::{predict_pairs, similarity_loss, train_similarity, PairExample};
pub use trainer::{
    evaluate_objective, predict_set, train, validation_mse, EpochRecord, StopReason, TrainingConfig, TrainingHistory,
};

use crate::models::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("{predictions} predictions but {targets} targets")]
    LengthMismatch { predictions: usize, targets: usize },
    #[error("{0} set is empty")]
    EmptySet(&'static str),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}
