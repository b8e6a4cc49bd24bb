//! 2-D convolution over `[time x freq x channels]` feature maps.
//!
//! Cross-correlation with "same" zero padding: each axis yields
//! `ceil(n / stride)` outputs, with the padding split as in TensorFlow
//! (`pad_before = total / 2`). Implemented as im2col followed by a GEMM.

use rand::Rng;

use super::param::glorot_limit;
use super::{matmul, NnError, Parameter, Real, Tensor};

#[derive(Debug, Clone)]
pub struct Conv2d<F> {
    /// `[k_time x k_freq x c_in x c_out]`
    pub kernel: Parameter<F>,
    /// `[c_out]`
    pub bias: Parameter<F>,
    pub stride_time: usize,
    pub stride_freq: usize,
}

/// Saved forward state for [`Conv2d::backward`].
#[derive(Debug, Clone)]
pub struct Conv2dCache<F> {
    patches: Vec<F>,
    in_time: usize,
    in_freq: usize,
    out_time: usize,
    out_freq: usize,
}

/// Output extent and leading pad for one "same"-padded axis.
pub fn same_padding(n: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let out = n.div_ceil(stride);
    let total = ((out - 1) * stride + kernel).saturating_sub(n);
    (out, total / 2)
}

impl<F: Real> Conv2d<F> {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        k_time: usize,
        k_freq: usize,
        c_in: usize,
        c_out: usize,
        stride_time: usize,
        stride_freq: usize,
        rng: &mut R,
    ) -> Self {
        let receptive = k_time * k_freq;
        let limit = glorot_limit(receptive * c_in, receptive * c_out);
        Self {
            kernel: Parameter::uniform(&[k_time, k_freq, c_in, c_out], limit, rng),
            bias: Parameter::zeros(&[c_out]),
            stride_time,
            stride_freq,
        }
    }

    pub fn k_time(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn k_freq(&self) -> usize {
        self.kernel.shape()[1]
    }

    pub fn c_in(&self) -> usize {
        self.kernel.shape()[2]
    }

    pub fn c_out(&self) -> usize {
        self.kernel.shape()[3]
    }

    pub fn output_dims(&self, in_time: usize, in_freq: usize) -> (usize, usize) {
        (in_time.div_ceil(self.stride_time), in_freq.div_ceil(self.stride_freq))
    }

    pub fn forward(&self, input: &Tensor<F>) -> Result<(Tensor<F>, Conv2dCache<F>), NnError> {
        let shape = input.shape();
        if shape.len() != 3 {
            return Err(NnError::Shape(format!(
                "conv2d expects [time, freq, channels], got {:?}",
                shape
            )));
        }
        if shape[2] != self.c_in() {
            return Err(NnError::ChannelMismatch {
                expected: self.c_in(),
                got: shape[2],
            });
        }
        let (in_time, in_freq) = (shape[0], shape[1]);
        if in_time == 0 || in_freq == 0 {
            return Err(NnError::Shape("conv2d input has an empty axis".into()));
        }
        let (kt, kf, cin, cout) = (self.k_time(), self.k_freq(), self.c_in(), self.c_out());
        let (out_time, pad_t) = same_padding(in_time, kt, self.stride_time);
        let (out_freq, pad_f) = same_padding(in_freq, kf, self.stride_freq);
        let k = kt * kf * cin;
        let rows = out_time * out_freq;

        let x = input.data();
        let mut patches = vec![F::zero(); rows * k];
        for ot in 0..out_time {
            for of in 0..out_freq {
                let row = &mut patches[(ot * out_freq + of) * k..][..k];
                for a in 0..kt {
                    let t = (ot * self.stride_time + a) as isize - pad_t as isize;
                    if t < 0 || t >= in_time as isize {
                        continue;
                    }
                    for b in 0..kf {
                        let f = (of * self.stride_freq + b) as isize - pad_f as isize;
                        if f < 0 || f >= in_freq as isize {
                            continue;
                        }
                        let src = (t as usize * in_freq + f as usize) * cin;
                        let dst = (a * kf + b) * cin;
                        row[dst..dst + cin].copy_from_slice(&x[src..src + cin]);
                    }
                }
            }
        }

        let mut out = vec![F::zero(); rows * cout];
        let bias = self.bias.value.data();
        for r in 0..rows {
            out[r * cout..(r + 1) * cout].copy_from_slice(bias);
        }
        matmul(
            false,
            false,
            rows,
            k,
            cout,
            &patches,
            self.kernel.value.data(),
            F::one(),
            &mut out,
        );
        let out = Tensor::from_vec(&[out_time, out_freq, cout], out)?;
        Ok((
            out,
            Conv2dCache {
                patches,
                in_time,
                in_freq,
                out_time,
                out_freq,
            },
        ))
    }

    /// Backward pass. Accumulates into `grads[0]` (kernel) and `grads[1]`
    /// (bias) and returns the input gradient.
    pub fn backward(&self, cache: &Conv2dCache<F>, d_out: &Tensor<F>, grads: &mut [Tensor<F>]) -> Tensor<F> {
        let (kt, kf, cin, cout) = (self.k_time(), self.k_freq(), self.c_in(), self.c_out());
        let k = kt * kf * cin;
        let rows = cache.out_time * cache.out_freq;
        let dy = d_out.data();
        assert_eq!(dy.len(), rows * cout, "conv2d upstream gradient shape");

        matmul(
            true,
            false,
            k,
            rows,
            cout,
            &cache.patches,
            dy,
            F::one(),
            grads[0].data_mut(),
        );
        let db = grads[1].data_mut();
        for r in 0..rows {
            for (g, &d) in db.iter_mut().zip(&dy[r * cout..(r + 1) * cout]) {
                *g += d;
            }
        }

        let mut d_patches = vec![F::zero(); rows * k];
        matmul(
            false,
            true,
            rows,
            cout,
            k,
            dy,
            self.kernel.value.data(),
            F::zero(),
            &mut d_patches,
        );

        let (in_time, in_freq) = (cache.in_time, cache.in_freq);
        let (_, pad_t) = same_padding(in_time, kt, self.stride_time);
        let (_, pad_f) = same_padding(in_freq, kf, self.stride_freq);
        let mut dx = Tensor::zeros(&[in_time, in_freq, cin]);
        let dxd = dx.data_mut();
        for ot in 0..cache.out_time {
            for of in 0..cache.out_freq {
                let row = &d_patches[(ot * cache.out_freq + of) * k..][..k];
                for a in 0..kt {
                    let t = (ot * self.stride_time + a) as isize - pad_t as isize;
                    if t < 0 || t >= in_time as isize {
                        continue;
                    }
                    for b in 0..kf {
                        let f = (of * self.stride_freq + b) as isize - pad_f as isize;
                        if f < 0 || f >= in_freq as isize {
                            continue;
                        }
                        let dst = (t as usize * in_freq + f as usize) * cin;
                        let src = (a * kf + b) * cin;
                        for c in 0..cin {
                            dxd[dst + c] += row[src + c];
                        }
                    }
                }
            }
        }
        dx
    }
}
