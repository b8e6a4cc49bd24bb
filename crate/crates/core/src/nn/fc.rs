use rand::Rng;

use super::param::glorot_limit;
use super::{matmul, NnError, Parameter, Real, Tensor};

/// Per-frame affine map `y = x W + b` on `[N x D_in]` inputs.
#[derive(Debug, Clone)]
pub struct Fc<F> {
    /// `[d_in x d_out]`
    pub weights: Parameter<F>,
    /// `[d_out]`
    pub bias: Parameter<F>,
}

impl<F: Real> Fc<F> {
    pub fn new<R: Rng + ?Sized>(d_in: usize, d_out: usize, rng: &mut R) -> Self {
        Self {
            weights: Parameter::uniform(&[d_in, d_out], glorot_limit(d_in, d_out), rng),
            bias: Parameter::zeros(&[d_out]),
        }
    }

    pub fn d_in(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn d_out(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn forward(&self, input: &Tensor<F>) -> Result<Tensor<F>, NnError> {
        if input.shape().len() != 2 || input.dim(1) != self.d_in() {
            return Err(NnError::Shape(format!(
                "fc expects [N, {}], got {:?}",
                self.d_in(),
                input.shape()
            )));
        }
        let (n, d_out) = (input.dim(0), self.d_out());
        let mut out = Vec::with_capacity(n * d_out);
        for _ in 0..n {
            out.extend_from_slice(self.bias.value.data());
        }
        matmul(
            false,
            false,
            n,
            self.d_in(),
            d_out,
            input.data(),
            self.weights.value.data(),
            F::one(),
            &mut out,
        );
        Tensor::from_vec(&[n, d_out], out)
    }

    /// Accumulates into `grads[0]` (weights) and `grads[1]` (bias).
    pub fn backward(&self, input: &Tensor<F>, d_out: &Tensor<F>, grads: &mut [Tensor<F>]) -> Tensor<F> {
        let (n, din, dout) = (input.dim(0), self.d_in(), self.d_out());
        let dy = d_out.data();
        matmul(
            true,
            false,
            din,
            n,
            dout,
            input.data(),
            dy,
            F::one(),
            grads[0].data_mut(),
        );
        let db = grads[1].data_mut();
        for row in dy.chunks(dout) {
            for (g, &d) in db.iter_mut().zip(row) {
                *g += d;
            }
        }
        let mut dx = Tensor::zeros(&[n, din]);
        matmul(
            false,
            true,
            n,
            dout,
            din,
            dy,
            self.weights.value.data(),
            F::zero(),
            dx.data_mut(),
        );
        dx
    }
}
