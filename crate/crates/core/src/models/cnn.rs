use rand::Rng;

use crate::nn::{relu, relu_backward, Conv2d, Conv2dCache, NnError, Parameter, Real, Tensor};

/// Four-or-more blocks of three 3x3 convolutions; the third layer of each
/// block strides by 3 along frequency. Time is never strided, so one
/// feature row comes out per input frame.
#[derive(Debug, Clone)]
pub struct CnnStack<F> {
    pub convs: Vec<Conv2d<F>>,
}

#[derive(Debug, Clone)]
pub struct CnnTape<F> {
    layers: Vec<(Conv2dCache<F>, Tensor<F>)>,
    valid_len: usize,
    out_freq: usize,
    out_channels: usize,
}

/// Frequency strides of one block.
const BLOCK_STRIDES: [usize; 3] = [1, 1, 3];

impl<F: Real> CnnStack<F> {
    pub fn new<R: Rng + ?Sized>(channels: &[usize], rng: &mut R) -> Self {
        let mut convs = Vec::with_capacity(channels.len() * 3);
        let mut c_in = 1;
        for &c in channels {
            for stride in BLOCK_STRIDES {
                convs.push(Conv2d::new(3, 3, c_in, c, 1, stride, rng));
                c_in = c;
            }
        }
        Self { convs }
    }

    pub fn n_layers(&self) -> usize {
        self.convs.len()
    }

    pub fn out_channels(&self) -> usize {
        self.convs.last().map_or(1, Conv2d::c_out)
    }

    /// Frequency extent before the stack and after each block.
    pub fn frequency_trace(&self, n_bins: usize) -> Vec<usize> {
        let mut trace = vec![n_bins];
        let mut f = n_bins;
        for (i, conv) in self.convs.iter().enumerate() {
            f = f.div_ceil(conv.stride_freq);
            if i % 3 == 2 {
                trace.push(f);
            }
        }
        trace
    }

    /// Per-frame feature width after flattening `(freq, channel)`.
    pub fn feature_width(&self, n_bins: usize) -> usize {
        self.frequency_trace(n_bins).last().copied().unwrap_or(n_bins) * self.out_channels()
    }

    /// Time receptive field of one output neuron, in frames.
    pub fn receptive_field_frames(&self) -> usize {
        let mut rf = 1;
        let mut jump = 1;
        for conv in &self.convs {
            rf += (conv.k_time() - 1) * jump;
            jump *= conv.stride_time;
        }
        rf
    }

    pub fn params(&self) -> Vec<&Parameter<F>> {
        self.convs.iter().flat_map(|c| [&c.kernel, &c.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter<F>> {
        self.convs
            .iter_mut()
            .flat_map(|c| [&mut c.kernel, &mut c.bias])
            .collect()
    }

    pub fn n_params(&self) -> usize {
        2 * self.convs.len()
    }

    /// `[T x bins] -> [T x feature_width]`. Rows at or beyond `valid_len`
    /// are zeroed after every layer, so padded frames never leak into
    /// valid ones.
    pub fn forward(&self, input: &Tensor<F>, valid_len: usize) -> Result<(Tensor<F>, CnnTape<F>), NnError> {
        let (t, bins) = (input.dim(0), input.dim(1));
        let mut x = input.clone().reshape(&[t, bins, 1])?;
        x.zero_rows_from(valid_len);
        let mut layers = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            let (y, cache) = conv.forward(&x)?;
            let mut y = relu(&y);
            y.zero_rows_from(valid_len);
            layers.push((cache, y.clone()));
            x = y;
        }
        let (out_freq, out_channels) = (x.dim(1), x.dim(2));
        let features = x.reshape(&[t, out_freq * out_channels])?;
        Ok((
            features,
            CnnTape {
                layers,
                valid_len,
                out_freq,
                out_channels,
            },
        ))
    }

    /// `grads` holds `(kernel, bias)` slots for every layer in order.
    pub fn backward(&self, tape: &CnnTape<F>, d_features: &Tensor<F>, grads: &mut [Tensor<F>]) -> Tensor<F> {
        let t = d_features.dim(0);
        let mut d = d_features
            .clone()
            .reshape(&[t, tape.out_freq, tape.out_channels])
            .expect("feature gradient matches tape");
        for (i, conv) in self.convs.iter().enumerate().rev() {
            let (cache, out) = &tape.layers[i];
            d.zero_rows_from(tape.valid_len);
            let dz = relu_backward(out, &d);
            d = conv.backward(cache, &dz, &mut grads[2 * i..2 * i + 2]);
        }
        let bins = d.dim(1);
        let mut d = d.reshape(&[t, bins]).expect("single input channel");
        d.zero_rows_from(tape.valid_len);
        d
    }
}
