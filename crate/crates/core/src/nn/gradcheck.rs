//! Finite-difference verification of analytic gradients.
//!
//! Each check builds a small double-precision instance of a layer, reduces
//! its output to a scalar with a fixed random projection, and compares the
//! backward pass against central differences for every parameter and
//! input element.

use rand::Rng;

use super::activation::{
    dropout, dropout_backward, mean_pool_time, mean_pool_time_backward, relu, relu_backward, Mode,
};
use super::{Blstm, Conv2d, Fc, NnError, Tensor};
use crate::rng::{stream, Rng64};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Layer kind and sizes for a gradient check instance.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv2d {
        time: usize,
        freq: usize,
        c_in: usize,
        c_out: usize,
        stride_time: usize,
        stride_freq: usize,
    },
    Blstm {
        frames: usize,
        d_in: usize,
        hidden: usize,
        valid_len: usize,
    },
    Fc {
        rows: usize,
        d_in: usize,
        d_out: usize,
    },
    Relu {
        len: usize,
    },
    Dropout {
        len: usize,
        rate: f64,
        train: bool,
    },
    MeanPoolTime {
        frames: usize,
        valid_len: usize,
    },
    FlattenFreq {
        time: usize,
        freq: usize,
        channels: usize,
    },
}

impl LayerSpec {
    pub fn validate(&self) -> Result<(), NnError> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(NnError::InvalidSpec(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        match *self {
            LayerSpec::Conv2d {
                time,
                freq,
                c_in,
                c_out,
                stride_time,
                stride_freq,
            } => {
                positive("time", time)?;
                positive("freq", freq)?;
                positive("c_in", c_in)?;
                positive("c_out", c_out)?;
                positive("stride_time", stride_time)?;
                positive("stride_freq", stride_freq)
            }
            LayerSpec::Blstm {
                frames,
                d_in,
                hidden,
                valid_len,
            } => {
                positive("frames", frames)?;
                positive("d_in", d_in)?;
                positive("hidden", hidden)?;
                if valid_len == 0 || valid_len > frames {
                    return Err(NnError::ValidLength { valid_len, frames });
                }
                Ok(())
            }
            LayerSpec::Fc { rows, d_in, d_out } => {
                positive("rows", rows)?;
                positive("d_in", d_in)?;
                positive("d_out", d_out)
            }
            LayerSpec::Relu { len } => positive("len", len),
            LayerSpec::Dropout { len, rate, .. } => {
                positive("len", len)?;
                if !(0.0..1.0).contains(&rate) {
                    return Err(NnError::InvalidSpec(format!("dropout rate {rate} outside [0, 1)")));
                }
                Ok(())
            }
            LayerSpec::MeanPoolTime { frames, valid_len } => {
                if valid_len == 0 || valid_len > frames {
                    return Err(NnError::ValidLength { valid_len, frames });
                }
                Ok(())
            }
            LayerSpec::FlattenFreq { time, freq, channels } => {
                positive("time", time)?;
                positive("freq", freq)?;
                positive("channels", channels)
            }
        }
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// Central differences of `loss` with respect to `n` scalar slots of `state`.
pub fn finite_difference<T>(
    state: &mut T,
    n: usize,
    get: impl Fn(&T, usize) -> f64,
    mut set: impl FnMut(&mut T, usize, f64),
    loss: impl Fn(&T) -> f64,
) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let original = get(state, i);
            set(state, i, original + FD_STEP);
            let plus = loss(state);
            set(state, i, original - FD_STEP);
            let minus = loss(state);
            set(state, i, original);
            (plus - minus) / (2.0 * FD_STEP)
        })
        .collect()
}

fn random_vec(rng: &mut Rng64, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn random_tensor(rng: &mut Rng64, shape: &[usize]) -> Tensor<f64> {
    let len = shape.iter().product();
    Tensor::from_vec(shape, random_vec(rng, len)).expect("length matches")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Tensors a state exposes as one flat list of scalar slots.
fn slot_get(tensors: &[&Tensor<f64>], mut i: usize) -> f64 {
    for t in tensors {
        if i < t.len() {
            return t.data()[i];
        }
        i -= t.len();
    }
    panic!("slot out of range")
}

fn slot_set(tensors: &mut [&mut Tensor<f64>], mut i: usize, v: f64) {
    for t in tensors.iter_mut() {
        if i < t.len() {
            t.data_mut()[i] = v;
            return;
        }
        i -= t.len();
    }
    panic!("slot out of range")
}

/// Runs a gradient check for one layer instance and returns the largest
/// relative error over all parameters and inputs.
pub fn grad_check(spec: &LayerSpec, seed: u64) -> Result<f64, NnError> {
    spec.validate()?;
    let mut rng = stream(seed, "grad-check", 0);
    match *spec {
        LayerSpec::Conv2d {
            time,
            freq,
            c_in,
            c_out,
            stride_time,
            stride_freq,
        } => {
            let mut conv = Conv2d::<f64>::new(3, 3, c_in, c_out, stride_time, stride_freq, &mut rng);
            conv.bias.value = random_tensor(&mut rng, &[c_out]);
            let x = random_tensor(&mut rng, &[time, freq, c_in]);
            let (y, cache) = conv.forward(&x)?;
            let r = random_tensor(&mut rng, y.shape());
            let mut grads = vec![Tensor::zeros(conv.kernel.shape()), Tensor::zeros(conv.bias.shape())];
            let dx = conv.backward(&cache, &r, &mut grads);
            let analytic = [grads[0].data(), grads[1].data(), dx.data()].concat();

            let mut state = (conv, x);
            let n = analytic.len();
            let numeric = finite_difference(
                &mut state,
                n,
                |s, i| slot_get(&[&s.0.kernel.value, &s.0.bias.value, &s.1], i),
                |s, i, v| {
                    let (conv, x) = s;
                    slot_set(&mut [&mut conv.kernel.value, &mut conv.bias.value, x], i, v)
                },
                |s| dot(s.0.forward(&s.1).expect("valid").0.data(), r.data()),
            );
            Ok(max_relative_error(&analytic, &numeric))
        }
        LayerSpec::Blstm {
            frames,
            d_in,
            hidden,
            valid_len,
        } => {
            let mut blstm = Blstm::<f64>::new(d_in, hidden, &mut rng);
            for cell in [&mut blstm.forward, &mut blstm.backward] {
                cell.bias.value = random_tensor(&mut rng, &[4 * hidden]);
            }
            let x = random_tensor(&mut rng, &[frames, d_in]);
            let (y, cache) = blstm.forward(&x, valid_len)?;
            let r = random_tensor(&mut rng, y.shape());
            let mut grads: Vec<Tensor<f64>> = blstm_params(&blstm).iter().map(|p| Tensor::zeros(p.shape())).collect();
            let dx = blstm.backward(&cache, &r, &mut grads);
            let mut analytic: Vec<f64> = grads.iter().flat_map(|g| g.data().to_vec()).collect();
            analytic.extend_from_slice(dx.data());

            let mut state = (blstm, x);
            let n = analytic.len();
            let numeric = finite_difference(
                &mut state,
                n,
                |s, i| {
                    let mut ts: Vec<&Tensor<f64>> = blstm_params(&s.0);
                    ts.push(&s.1);
                    slot_get(&ts, i)
                },
                |s, i, v| {
                    let (b, x) = s;
                    let mut ts = vec![
                        &mut b.forward.w_input.value,
                        &mut b.forward.w_hidden.value,
                        &mut b.forward.bias.value,
                        &mut b.backward.w_input.value,
                        &mut b.backward.w_hidden.value,
                        &mut b.backward.bias.value,
                        x,
                    ];
                    slot_set(&mut ts, i, v)
                },
                |s| dot(s.0.forward(&s.1, valid_len).expect("valid").0.data(), r.data()),
            );
            Ok(max_relative_error(&analytic, &numeric))
        }
        LayerSpec::Fc { rows, d_in, d_out } => {
            let mut fc = Fc::<f64>::new(d_in, d_out, &mut rng);
            fc.bias.value = random_tensor(&mut rng, &[d_out]);
            let x = random_tensor(&mut rng, &[rows, d_in]);
            let y = fc.forward(&x)?;
            let r = random_tensor(&mut rng, y.shape());
            let mut grads = vec![Tensor::zeros(&[d_in, d_out]), Tensor::zeros(&[d_out])];
            let dx = fc.backward(&x, &r, &mut grads);
            let analytic = [grads[0].data(), grads[1].data(), dx.data()].concat();
            let mut state = (fc, x);
            let n = analytic.len();
            let numeric = finite_difference(
                &mut state,
                n,
                |s, i| slot_get(&[&s.0.weights.value, &s.0.bias.value, &s.1], i),
                |s, i, v| {
                    let (fc, x) = s;
                    slot_set(&mut [&mut fc.weights.value, &mut fc.bias.value, x], i, v)
                },
                |s| dot(s.0.forward(&s.1).expect("valid").data(), r.data()),
            );
            Ok(max_relative_error(&analytic, &numeric))
        }
        LayerSpec::Relu { len } => {
            // Keep inputs away from the kink so the finite difference is smooth.
            let data = (0..len)
                .map(|_| {
                    let mag = rng.random_range(0.05..1.0);
                    if rng.random::<bool>() {
                        mag
                    } else {
                        -mag
                    }
                })
                .collect();
            let mut x = Tensor::from_vec(&[len], data)?;
            let y = relu(&x);
            let r = random_tensor(&mut rng, &[len]);
            let analytic = relu_backward(&y, &r).into_vec();
            let numeric = finite_difference(
                &mut x,
                len,
                |s, i| s.data()[i],
                |s, i, v| s.data_mut()[i] = v,
                |s| dot(relu(s).data(), r.data()),
            );
            Ok(max_relative_error(&analytic, &numeric))
        }
        LayerSpec::Dropout { len, rate, train } => {
            let mut x = random_tensor(&mut rng, &[len]);
            let r = random_tensor(&mut rng, &[len]);
            let mask_seed: u64 = rng.random();
            let run = |x: &Tensor<f64>| {
                let mut mask_rng = stream(mask_seed, "grad-check-dropout", 0);
                let mut mode = if train { Mode::Train(&mut mask_rng) } else { Mode::Eval };
                dropout(x, rate, &mut mode)
            };
            let (_, mask) = run(&x);
            let analytic = dropout_backward(mask.as_deref(), &r).into_vec();
            let numeric = finite_difference(
                &mut x,
                len,
                |s, i| s.data()[i],
                |s, i, v| s.data_mut()[i] = v,
                |s| dot(run(s).0.data(), r.data()),
            );
            Ok(max_relative_error(&analytic, &numeric))
        }
        LayerSpec::MeanPoolTime { frames, valid_len } => {
            let mut scores = random_vec(&mut rng, frames);
            let weight: f64 = rng.random_range(0.5..2.0);
            let analytic = mean_pool_time_backward(frames, valid_len, weight);
            let numeric = finite_difference(
                &mut scores,
                frames,
                |s, i| s[i],
                |s, i, v| s[i] = v,
                |s| weight * mean_pool_time(s, valid_len),
            );
            Ok(max_relative_error(&analytic, &numeric))
        }
        LayerSpec::FlattenFreq { time, freq, channels } => {
            let mut x = random_tensor(&mut rng, &[time, freq, channels]);
            let r = random_tensor(&mut rng, &[time, freq * channels]);
            let flatten = |x: &Tensor<f64>| x.clone().reshape(&[time, freq * channels]).expect("sizes match");
            // The backward of a reshape is the reverse reshape.
            let analytic = r.clone().reshape(&[time, freq, channels])?.into_vec();
            let n = x.len();
            let numeric = finite_difference(
                &mut x,
                n,
                |s, i| s.data()[i],
                |s, i, v| s.data_mut()[i] = v,
                |s| dot(flatten(s).data(), r.data()),
            );
            Ok(max_relative_error(&analytic, &numeric))
        }
    }
}

fn blstm_params(b: &Blstm<f64>) -> Vec<&Tensor<f64>> {
    vec![
        &b.forward.w_input.value,
        &b.forward.w_hidden.value,
        &b.forward.bias.value,
        &b.backward.w_input.value,
        &b.backward.w_hidden.value,
        &b.backward.bias.value,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fc_gradients() {
        let err = grad_check(
            &LayerSpec::Fc {
                rows: 3,
                d_in: 4,
                d_out: 2,
            },
            1,
        )
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn conv_gradients() {
        let spec = LayerSpec::Conv2d {
            time: 5,
            freq: 7,
            c_in: 2,
            c_out: 4,
            stride_time: 1,
            stride_freq: 3,
        };
        let err = grad_check(&spec, 2).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn blstm_gradients() {
        let spec = LayerSpec::Blstm {
            frames: 4,
            d_in: 3,
            hidden: 3,
            valid_len: 4,
        };
        let err = grad_check(&spec, 3).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn masked_blstm_gradients() {
        let spec = LayerSpec::Blstm {
            frames: 6,
            d_in: 2,
            hidden: 3,
            valid_len: 4,
        };
        let err = grad_check(&spec, 4).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(grad_check(&LayerSpec::Relu { len: 0 }, 0).is_err());
        assert!(grad_check(
            &LayerSpec::Dropout {
                len: 3,
                rate: 1.0,
                train: true
            },
            0
        )
        .is_err());
        assert!(grad_check(
            &LayerSpec::MeanPoolTime {
                frames: 3,
                valid_len: 4
            },
            0
        )
        .is_err());
    }

    #[test]
    fn relative_error_uses_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1e-9, 0.0) - 0.1).abs() < 1e-12);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-12);
    }
}
