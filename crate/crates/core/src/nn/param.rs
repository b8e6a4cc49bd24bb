use rand::Rng;

use super::{Real, Tensor};

/// Trainable tensor with its gradient and Adam moment estimates.
#[derive(Debug, Clone)]
pub struct Parameter<F> {
    pub value: Tensor<F>,
    pub grad: Tensor<F>,
    pub adam_m: Tensor<F>,
    pub adam_v: Tensor<F>,
    pub step_count: u64,
}

impl<F: Real> Parameter<F> {
    pub fn new(value: Tensor<F>) -> Self {
        let shape = value.shape().to_vec();
        Self {
            value,
            grad: Tensor::zeros(&shape),
            adam_m: Tensor::zeros(&shape),
            adam_v: Tensor::zeros(&shape),
            step_count: 0,
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::new(Tensor::zeros(shape))
    }

    /// Uniform initialization in `[-limit, limit]`.
    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], limit: f64, rng: &mut R) -> Self {
        let len: usize = shape.iter().product();
        let data = (0..len).map(|_| F::lit(rng.random_range(-limit..=limit))).collect();
        Self::new(Tensor::from_vec(shape, data).expect("length matches shape"))
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(F::zero());
    }
}

/// Glorot-style limit `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Gradient buffer aligned with a module's parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<F>(pub Vec<Tensor<F>>);

impl<F: Real> Grads<F> {
    pub fn zeros_like<'a>(params: impl IntoIterator<Item = &'a Parameter<F>>) -> Self {
        Self(params.into_iter().map(|p| Tensor::zeros(p.shape())).collect())
    }

    pub fn add_assign(&mut self, other: &Grads<F>) {
        assert_eq!(self.0.len(), other.0.len(), "gradient buffers differ");
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.add_assign(b);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(Tensor::is_finite)
    }

    pub fn slots(&mut self) -> &mut [Tensor<F>] {
        &mut self.0
    }
}

/// Anything that owns named trainable parameters.
///
/// Both visitors must yield parameters in the same order; gradient buffers
/// and checkpoints depend on it.
pub trait Module<F: Real> {
    fn params(&self) -> Vec<(String, &Parameter<F>)>;

    fn params_mut(&mut self) -> Vec<&mut Parameter<F>>;

    fn zero_grads(&self) -> Grads<F> {
        Grads::zeros_like(self.params().into_iter().map(|(_, p)| p))
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|(_, p)| p.value.len()).sum()
    }

    /// Copy a gradient buffer into each parameter's `grad`.
    fn load_grads(&mut self, grads: &Grads<F>) {
        let params = self.params_mut();
        assert_eq!(params.len(), grads.0.len(), "gradient buffer mismatch");
        for (p, g) in params.into_iter().zip(&grads.0) {
            p.grad.data_mut().copy_from_slice(g.data());
        }
    }
}
