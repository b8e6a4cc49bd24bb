use super::{Parameter, Real};

/// Adam with bias correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Adam {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }

    /// Applies one update from each parameter's `grad`, then zeroes it.
    pub fn step<'a, F: Real>(&self, params: impl IntoIterator<Item = &'a mut Parameter<F>>) {
        for p in params {
            p.step_count += 1;
            let t = p.step_count as i32;
            let c1 = 1.0 - self.beta1.powi(t);
            let c2 = 1.0 - self.beta2.powi(t);
            let (b1, b2) = (F::lit(self.beta1), F::lit(self.beta2));
            let (one_b1, one_b2) = (F::lit(1.0 - self.beta1), F::lit(1.0 - self.beta2));
            let lr = F::lit(self.learning_rate);
            let (c1, c2, eps) = (F::lit(c1), F::lit(c2), F::lit(self.eps));
            let value = p.value.data_mut();
            let grad = p.grad.data();
            let m = p.adam_m.data_mut();
            let v = p.adam_v.data_mut();
            for i in 0..value.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + one_b1 * g;
                v[i] = b2 * v[i] + one_b2 * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            p.zero_grad();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut p = Parameter::new(Tensor::from_vec(&[3], vec![1.0f64, -2.0, 0.5]).unwrap());
        let adam = Adam::default();
        for _ in 0..10 {
            adam.step([&mut p]);
        }
        assert_eq!(p.value.data(), &[1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_is_bounded_by_learning_rate() {
        let grads = [3.7, -0.002, 1e-6, -250.0];
        let mut p = Parameter::new(Tensor::zeros(&[4]));
        p.grad = Tensor::from_vec(&[4], grads.to_vec()).unwrap();
        let adam = Adam::default();
        adam.step([&mut p]);
        for (&theta, &g) in p.value.data().iter().zip(&grads) {
            // Closed form of step one: -lr * g / (|g| + eps).
            let want = -adam.learning_rate * g / (g.abs() + adam.eps);
            assert!((theta - want).abs() < 1e-15);
            assert!(theta.abs() <= adam.learning_rate);
        }
        assert!(p.grad.data().iter().all(|&g| g == 0.0));
    }

    fn steps_to_halve(adam: Adam, limit: usize) -> Option<usize> {
        let mut p = Parameter::new(Tensor::from_vec(&[1], vec![1.0f64]).unwrap());
        for step in 1..=limit {
            let theta = p.value.data()[0];
            p.grad.data_mut()[0] = 2.0 * theta;
            adam.step([&mut p]);
            if p.value.data()[0].abs() < 0.5 {
                return Some(step);
            }
        }
        None
    }

    #[test]
    fn minimizes_a_quadratic_bowl() {
        let steps = steps_to_halve(Adam::with_learning_rate(1e-3), 5000);
        assert!(steps.is_some(), "lr 1e-3 did not reach |theta| < 0.5");
        // At lr 1e-4 the per-step move is at most 1e-4 and the second moment
        // remembers earlier, larger gradients, so 5000 steps are not enough.
        assert_eq!(steps_to_halve(Adam::default(), 5000), None);
        assert!(steps_to_halve(Adam::default(), 6000).is_some());
    }
}
