//! Frame-wise MOS regressors: a feature extractor (CNN, BLSTM or CNN then
//! BLSTM), a two-layer per-frame head, and average pooling over valid frames.

use rand::Rng;

use super::{Architecture, CnnStack, CnnTape, ModelConfig, ModelError};
use crate::dsp::Spectrogram;
use crate::nn::{
    dropout, dropout_backward, mean_pool_time, relu, relu_backward, Blstm, BlstmCache, Fc, Grads, Mode, Module,
    Parameter, Real, Tensor,
};

/// Frame scores `q_t` and their mean `Q` over the first `valid_len` frames.
#[derive(Debug, Clone, PartialEq)]
pub struct MosPrediction<F> {
    pub frame_scores: Vec<F>,
    pub utterance_score: F,
    pub valid_len: usize,
}

#[derive(Debug, Clone)]
pub struct MosNet<F> {
    config: ModelConfig,
    pub cnn: Option<CnnStack<F>>,
    pub blstm: Option<Blstm<F>>,
    pub fc_hidden: Fc<F>,
    pub fc_out: Fc<F>,
}

/// Everything [`MosNet::backward`] needs from a training forward.
#[derive(Debug, Clone)]
pub struct MosTape<F> {
    cnn: Option<CnnTape<F>>,
    blstm: Option<BlstmCache<F>>,
    head_input: Tensor<F>,
    hidden: Tensor<F>,
    dropout_mask: Option<Vec<F>>,
    dropped: Tensor<F>,
    valid_len: usize,
}

impl<F: Real> MosNet<F> {
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self, ModelError> {
        config.validate()?;
        if config.architecture.is_similarity() {
            return Err(ModelError::InvalidConfig(format!(
                "{} is not a MOS architecture",
                config.architecture
            )));
        }
        let cnn = config
            .architecture
            .uses_cnn()
            .then(|| CnnStack::new(&config.channels, rng));
        let mut width = cnn.as_ref().map_or(config.n_bins, |c| c.feature_width(config.n_bins));
        let blstm = config.architecture.uses_blstm().then(|| {
            let b = Blstm::new(width, config.blstm_hidden, rng);
            width = b.output_width();
            b
        });
        let fc_hidden = Fc::new(width, config.fc_hidden, rng);
        let fc_out = Fc::new(config.fc_hidden, 1, rng);
        Ok(Self {
            config,
            cnn,
            blstm,
            fc_hidden,
            fc_out,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn architecture(&self) -> Architecture {
        self.config.architecture
    }

    fn check_input(&self, input: &Tensor<F>, valid_len: usize) -> Result<(), ModelError> {
        if input.shape().len() != 2 || input.dim(1) != self.config.n_bins {
            return Err(ModelError::BinMismatch {
                expected: self.config.n_bins,
                got: input.shape().get(1).copied().unwrap_or(0),
            });
        }
        let n = input.dim(0);
        if n == 0 || valid_len == 0 || valid_len > n {
            return Err(ModelError::ValidLength { valid_len, frames: n });
        }
        Ok(())
    }

    /// Scores every frame of `input` (`[N x bins]`) and pools the first
    /// `valid_len`. Frames past `valid_len` are masked out of every layer.
    pub fn forward(
        &self,
        input: &Tensor<F>,
        valid_len: usize,
        mode: &mut Mode<'_>,
    ) -> Result<(MosPrediction<F>, MosTape<F>), ModelError> {
        self.check_input(input, valid_len)?;
        let (features, cnn_tape) = match &self.cnn {
            Some(cnn) => {
                let (f, t) = cnn.forward(input, valid_len)?;
                (f, Some(t))
            }
            None => {
                let mut x = input.clone();
                x.zero_rows_from(valid_len);
                (x, None)
            }
        };
        let (head_input, blstm_cache) = match &self.blstm {
            Some(b) => {
                let (y, c) = b.forward(&features, valid_len)?;
                (y, Some(c))
            }
            None => (features, None),
        };
        let hidden = relu(&self.fc_hidden.forward(&head_input)?);
        let (dropped, dropout_mask) = dropout(&hidden, self.config.dropout_rate, mode);
        let scores = self.fc_out.forward(&dropped)?.into_vec();
        let utterance_score = mean_pool_time(&scores, valid_len);
        Ok((
            MosPrediction {
                frame_scores: scores,
                utterance_score,
                valid_len,
            },
            MosTape {
                cnn: cnn_tape,
                blstm: blstm_cache,
                head_input,
                hidden,
                dropout_mask,
                dropped,
                valid_len,
            },
        ))
    }

    /// Eval-mode forward.
    pub fn predict(&self, input: &Tensor<F>, valid_len: usize) -> Result<MosPrediction<F>, ModelError> {
        Ok(self.forward(input, valid_len, &mut Mode::Eval)?.0)
    }

    /// Backpropagates `d_frame_scores` (one entry per input frame) into
    /// `grads`, which must come from [`Module::zero_grads`].
    pub fn backward(&self, tape: &MosTape<F>, d_frame_scores: &[F], grads: &mut Grads<F>) {
        let n = tape.head_input.dim(0);
        assert_eq!(d_frame_scores.len(), n, "one gradient per frame");
        let slots = grads.slots();
        let n_slots = slots.len();
        let (body, head) = slots.split_at_mut(n_slots - 4);
        let (g_hidden, g_out) = head.split_at_mut(2);

        let d_scores = Tensor::from_vec(&[n, 1], d_frame_scores.to_vec()).expect("one per frame");
        let d_dropped = self.fc_out.backward(&tape.dropped, &d_scores, g_out);
        let d_hidden = dropout_backward(tape.dropout_mask.as_deref(), &d_dropped);
        let d_pre = relu_backward(&tape.hidden, &d_hidden);
        let mut d = self.fc_hidden.backward(&tape.head_input, &d_pre, g_hidden);

        let cnn_slots = self.cnn.as_ref().map_or(0, CnnStack::n_params);
        let (g_cnn, g_blstm) = body.split_at_mut(cnn_slots);
        if let (Some(blstm), Some(cache)) = (&self.blstm, &tape.blstm) {
            d.zero_rows_from(tape.valid_len);
            d = blstm.backward(cache, &d, g_blstm);
        }
        if let (Some(cnn), Some(cnn_tape)) = (&self.cnn, &tape.cnn) {
            cnn.backward(cnn_tape, &d, g_cnn);
        }
    }
}

impl<F: Real> Module<F> for MosNet<F> {
    fn params(&self) -> Vec<(String, &Parameter<F>)> {
        let mut out = Vec::new();
        if let Some(cnn) = &self.cnn {
            for (i, c) in cnn.convs.iter().enumerate() {
                out.push((format!("conv{i}.kernel"), &c.kernel));
                out.push((format!("conv{i}.bias"), &c.bias));
            }
        }
        if let Some(b) = &self.blstm {
            for (dir, cell) in [("fwd", &b.forward), ("bwd", &b.backward)] {
                out.push((format!("blstm.{dir}.w_input"), &cell.w_input));
                out.push((format!("blstm.{dir}.w_hidden"), &cell.w_hidden));
                out.push((format!("blstm.{dir}.bias"), &cell.bias));
            }
        }
        out.push(("fc_hidden.weights".into(), &self.fc_hidden.weights));
        out.push(("fc_hidden.bias".into(), &self.fc_hidden.bias));
        out.push(("fc_out.weights".into(), &self.fc_out.weights));
        out.push(("fc_out.bias".into(), &self.fc_out.bias));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<F>> {
        let mut out = Vec::new();
        if let Some(cnn) = &mut self.cnn {
            out.extend(cnn.params_mut());
        }
        if let Some(b) = &mut self.blstm {
            for cell in [&mut b.forward, &mut b.backward] {
                out.push(&mut cell.w_input);
                out.push(&mut cell.w_hidden);
                out.push(&mut cell.bias);
            }
        }
        out.push(&mut self.fc_hidden.weights);
        out.push(&mut self.fc_hidden.bias);
        out.push(&mut self.fc_out.weights);
        out.push(&mut self.fc_out.bias);
        out
    }
}

/// Scores a spectrogram, pooling over its first `valid_len` frames.
pub fn forward_mos<F: Real>(
    model: &MosNet<F>,
    spec: &Spectrogram,
    valid_len: usize,
    mode: &mut Mode<'_>,
) -> Result<MosPrediction<F>, ModelError> {
    Ok(model.forward(&spec.to_tensor(), valid_len, mode)?.0)
}
