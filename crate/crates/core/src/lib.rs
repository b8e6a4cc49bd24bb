//! Neural predictors of mean opinion score (MOS) and speaker similarity for
//! converted speech.
//!
//! The crate covers the full pipeline: waveform ingestion and magnitude
//! spectrograms ([`dsp`]), a small hand-differentiated network engine
//! ([`nn`]), the CNN / BLSTM / CNN-BLSTM predictors ([`models`]), the
//! combined utterance and frame objective with early-stopped training
//! ([`training`]), correlation metrics ([`metrics`]), listener bootstrap
//! analysis ([`bootstrap`]) and rating ingestion plus synthetic corpora
//! ([`data`]).

pub mod bootstrap;
pub mod data;
pub mod dsp;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod rng;
pub mod training;

pub use bootstrap::{inherent_predictability, BootstrapReport, ListenerPanel};
pub use data::{DataError, RatingKind, RatingRecord};
pub use dsp::{DspError, Spectrogram, Waveform};
pub use metrics::{EvalLevel, EvalReport};
pub use models::{Architecture, Model, ModelConfig, ModelError, MosNet, SimilarityHead, SimilarityNet};
pub use training::{TrainError, TrainingConfig, TrainingHistory};
