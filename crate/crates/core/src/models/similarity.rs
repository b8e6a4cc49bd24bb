//! Pairwise speaker-similarity network: one shared CNN embeds both
//! utterances, the time-averaged embeddings are concatenated and classified
//! by two FC layers.

use rand::Rng;

use super::{Architecture, CnnStack, CnnTape, ModelConfig, ModelError};
use crate::nn::{dropout, dropout_backward, relu, relu_backward, Fc, Grads, Mode, Module, Parameter, Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityHead {
    /// One logistic output, the probability of "same speaker".
    Scalar,
    /// Softmax over `[different, same]`.
    TwoClass,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimilarityOutput<F> {
    Scalar(F),
    TwoClass([F; 2]),
}

impl<F: Real> SimilarityOutput<F> {
    /// Probability that both utterances come from the same speaker.
    pub fn same_probability(&self) -> F {
        match self {
            SimilarityOutput::Scalar(p) => *p,
            SimilarityOutput::TwoClass(p) => p[1],
        }
    }

    /// Predicted label: scalar output thresholded at 0.5, 2-class by argmax.
    pub fn label(&self) -> u8 {
        match self {
            SimilarityOutput::Scalar(p) => u8::from(*p >= F::lit(0.5)),
            SimilarityOutput::TwoClass(p) => u8::from(p[1] > p[0]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimilarityForward<F> {
    pub output: SimilarityOutput<F>,
    /// Pre-squash outputs (one or two entries).
    pub logits: Vec<F>,
    /// `[latent_a, latent_b]`
    pub pair_features: Vec<F>,
}

#[derive(Debug, Clone)]
pub struct SimilarityTape<F> {
    tapes: [CnnTape<F>; 2],
    frames: [usize; 2],
    valid: [usize; 2],
    pair: Tensor<F>,
    hidden: Tensor<F>,
    dropout_mask: Option<Vec<F>>,
    dropped: Tensor<F>,
}

#[derive(Debug, Clone)]
pub struct SimilarityNet<F> {
    config: ModelConfig,
    pub cnn: CnnStack<F>,
    pub fc_hidden: Fc<F>,
    pub fc_out: Fc<F>,
}

fn sigmoid<F: Real>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

impl<F: Real> SimilarityNet<F> {
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self, ModelError> {
        config.validate()?;
        let outputs = match config.architecture {
            Architecture::SimilarityScalar => 1,
            Architecture::SimilarityTwoClass => 2,
            other => {
                return Err(ModelError::InvalidConfig(format!(
                    "{other} is not a similarity architecture"
                )))
            }
        };
        let cnn = CnnStack::new(&config.channels, rng);
        let latent = cnn.feature_width(config.n_bins);
        let fc_hidden = Fc::new(2 * latent, config.fc_hidden, rng);
        let fc_out = Fc::new(config.fc_hidden, outputs, rng);
        Ok(Self {
            config,
            cnn,
            fc_hidden,
            fc_out,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn head(&self) -> SimilarityHead {
        if self.config.architecture == Architecture::SimilarityScalar {
            SimilarityHead::Scalar
        } else {
            SimilarityHead::TwoClass
        }
    }

    pub fn latent_width(&self) -> usize {
        self.cnn.feature_width(self.config.n_bins)
    }

    fn embed(&self, x: &Tensor<F>, valid: usize) -> Result<(Vec<F>, CnnTape<F>), ModelError> {
        if x.shape().len() != 2 || x.dim(1) != self.config.n_bins {
            return Err(ModelError::BinMismatch {
                expected: self.config.n_bins,
                got: x.shape().get(1).copied().unwrap_or(0),
            });
        }
        if valid == 0 || valid > x.dim(0) {
            return Err(ModelError::ValidLength {
                valid_len: valid,
                frames: x.dim(0),
            });
        }
        let (features, tape) = self.cnn.forward(x, valid)?;
        let width = features.dim(1);
        let mut mean = vec![F::zero(); width];
        for row in features.data().chunks(width).take(valid) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let inv = F::one() / F::lit(valid as f64);
        mean.iter_mut().for_each(|m| *m *= inv);
        Ok((mean, tape))
    }

    pub fn forward(
        &self,
        a: &Tensor<F>,
        valid_a: usize,
        b: &Tensor<F>,
        valid_b: usize,
        mode: &mut Mode<'_>,
    ) -> Result<(SimilarityForward<F>, SimilarityTape<F>), ModelError> {
        let (latent_a, tape_a) = self.embed(a, valid_a)?;
        let (latent_b, tape_b) = self.embed(b, valid_b)?;
        let pair_features = [latent_a, latent_b].concat();
        let pair = Tensor::from_vec(&[1, pair_features.len()], pair_features.clone())?;
        let hidden = relu(&self.fc_hidden.forward(&pair)?);
        let (dropped, dropout_mask) = dropout(&hidden, self.config.dropout_rate, mode);
        let logits = self.fc_out.forward(&dropped)?.into_vec();
        let output = match self.head() {
            SimilarityHead::Scalar => SimilarityOutput::Scalar(sigmoid(logits[0])),
            SimilarityHead::TwoClass => {
                let m = logits[0].max(logits[1]);
                let e0 = (logits[0] - m).exp();
                let e1 = (logits[1] - m).exp();
                let s = e0 + e1;
                SimilarityOutput::TwoClass([e0 / s, e1 / s])
            }
        };
        Ok((
            SimilarityForward {
                output,
                logits,
                pair_features,
            },
            SimilarityTape {
                tapes: [tape_a, tape_b],
                frames: [a.dim(0), b.dim(0)],
                valid: [valid_a, valid_b],
                pair,
                hidden,
                dropout_mask,
                dropped,
            },
        ))
    }

    pub fn predict(
        &self,
        a: &Tensor<F>,
        valid_a: usize,
        b: &Tensor<F>,
        valid_b: usize,
    ) -> Result<SimilarityOutput<F>, ModelError> {
        Ok(self.forward(a, valid_a, b, valid_b, &mut Mode::Eval)?.0.output)
    }

    pub fn backward(&self, tape: &SimilarityTape<F>, d_logits: &[F], grads: &mut Grads<F>) {
        let slots = grads.slots();
        let n_slots = slots.len();
        let (g_cnn, head) = slots.split_at_mut(n_slots - 4);
        let (g_hidden, g_out) = head.split_at_mut(2);
        let d_logits = Tensor::from_vec(&[1, d_logits.len()], d_logits.to_vec()).expect("logit gradient");
        let d_dropped = self.fc_out.backward(&tape.dropped, &d_logits, g_out);
        let d_hidden = dropout_backward(tape.dropout_mask.as_deref(), &d_dropped);
        let d_pre = relu_backward(&tape.hidden, &d_hidden);
        let d_pair = self.fc_hidden.backward(&tape.pair, &d_pre, g_hidden);
        let latent = d_pair.len() / 2;
        for side in 0..2 {
            let d_latent = &d_pair.data()[side * latent..(side + 1) * latent];
            let (frames, valid) = (tape.frames[side], tape.valid[side]);
            let inv = F::one() / F::lit(valid as f64);
            let mut d_features = Tensor::zeros(&[frames, latent]);
            for row in d_features.data_mut().chunks_mut(latent).take(valid) {
                for (r, &d) in row.iter_mut().zip(d_latent) {
                    *r = d * inv;
                }
            }
            self.cnn.backward(&tape.tapes[side], &d_features, g_cnn);
        }
    }
}

impl<F: Real> Module<F> for SimilarityNet<F> {
    fn params(&self) -> Vec<(String, &Parameter<F>)> {
        let mut out = Vec::new();
        for (i, c) in self.cnn.convs.iter().enumerate() {
            out.push((format!("conv{i}.kernel"), &c.kernel));
            out.push((format!("conv{i}.bias"), &c.bias));
        }
        out.push(("fc_hidden.weights".into(), &self.fc_hidden.weights));
        out.push(("fc_hidden.bias".into(), &self.fc_hidden.bias));
        out.push(("fc_out.weights".into(), &self.fc_out.weights));
        out.push(("fc_out.bias".into(), &self.fc_out.bias));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<F>> {
        let mut out = self.cnn.params_mut();
        out.push(&mut self.fc_hidden.weights);
        out.push(&mut self.fc_hidden.bias);
        out.push(&mut self.fc_out.weights);
        out.push(&mut self.fc_out.bias);
        out
    }
}
