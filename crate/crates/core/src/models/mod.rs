//! The three MOS architectures and the pairwise similarity network.

mod cnn;
mod config;
mod mosnet;
mod similarity;

pub use cnn::{CnnStack, CnnTape};
pub use config::{Architecture, ModelConfig};
pub use mosnet::{forward_mos, MosNet, MosPrediction, MosTape};
pub use similarity::{SimilarityForward, SimilarityHead, SimilarityNet, SimilarityOutput, SimilarityTape};

use crate::dsp::Spectrogram;
use crate::nn::{Grads, Mode, Module, NnError, Parameter, Real};
use crate::rng::stream;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(
        "unknown architecture '{0}' (expected one of blstm, cnn, cnn-blstm, similarity-scalar, similarity-2class)"
    )]
    UnknownArchitecture(String),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("input has {got} frequency bins, model expects {expected}")]
    BinMismatch { expected: usize, got: usize },
    #[error("valid length {valid_len} outside 1..={frames}")]
    ValidLength { valid_len: usize, frames: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Either kind of network, as built from a [`ModelConfig`].
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Model<F> {
    Mos(MosNet<F>),
    Similarity(SimilarityNet<F>),
}

impl<F: Real> Model<F> {
    pub fn config(&self) -> &ModelConfig {
        match self {
            Model::Mos(m) => m.config(),
            Model::Similarity(m) => m.config(),
        }
    }

    pub fn as_mos(&self) -> Option<&MosNet<F>> {
        match self {
            Model::Mos(m) => Some(m),
            Model::Similarity(_) => None,
        }
    }

    pub fn into_mos(self) -> Option<MosNet<F>> {
        match self {
            Model::Mos(m) => Some(m),
            Model::Similarity(_) => None,
        }
    }

    pub fn into_similarity(self) -> Option<SimilarityNet<F>> {
        match self {
            Model::Similarity(m) => Some(m),
            Model::Mos(_) => None,
        }
    }
}

impl<F> From<MosNet<F>> for Model<F> {
    fn from(m: MosNet<F>) -> Self {
        Model::Mos(m)
    }
}

impl<F> From<SimilarityNet<F>> for Model<F> {
    fn from(m: SimilarityNet<F>) -> Self {
        Model::Similarity(m)
    }
}

impl<F: Real> Module<F> for Model<F> {
    fn params(&self) -> Vec<(String, &Parameter<F>)> {
        match self {
            Model::Mos(m) => m.params(),
            Model::Similarity(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<F>> {
        match self {
            Model::Mos(m) => m.params_mut(),
            Model::Similarity(m) => m.params_mut(),
        }
    }

    fn zero_grads(&self) -> Grads<F> {
        Grads::zeros_like(self.params().into_iter().map(|(_, p)| p))
    }
}

/// Builds a freshly initialized network; all weights derive from `seed`.
pub fn build_model<F: Real>(cfg: &ModelConfig, seed: u64) -> Result<Model<F>, ModelError> {
    let mut rng = stream(seed, "init", 0);
    if cfg.architecture.is_similarity() {
        Ok(Model::Similarity(SimilarityNet::new(cfg.clone(), &mut rng)?))
    } else {
        Ok(Model::Mos(MosNet::new(cfg.clone(), &mut rng)?))
    }
}

/// Runs the pair through a similarity network.
pub fn forward_similarity<F: Real>(
    model: &SimilarityNet<F>,
    spec_a: &Spectrogram,
    spec_b: &Spectrogram,
    mode: &mut Mode<'_>,
) -> Result<SimilarityForward<F>, ModelError> {
    let (a, b) = (spec_a.to_tensor(), spec_b.to_tensor());
    Ok(model.forward(&a, spec_a.n_frames(), &b, spec_b.n_frames(), mode)?.0)
}
