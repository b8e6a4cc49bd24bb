//! Bidirectional LSTM.
//!
//! Gate layout along the `4H` axis is `[input, forget, cell, output]`:
//!
//! ```text
//! z_t = x_t W_x + h_{t-1} W_h + b
//! i = sigmoid(z_i)  f = sigmoid(z_f)  g = tanh(z_g)  o = sigmoid(z_o)
//! c_t = f * c_{t-1} + i * g
//! h_t = o * tanh(c_t)
//! ```
//!
//! Initial states are zero. Frames at or beyond `valid_len` are never
//! visited; their outputs are zero.

use rand::Rng;

use super::{matmul, NnError, Parameter, Real, Tensor};

#[derive(Debug, Clone)]
pub struct Lstm<F> {
    /// `[d_in x 4H]`
    pub w_input: Parameter<F>,
    /// `[H x 4H]`
    pub w_hidden: Parameter<F>,
    /// `[4H]`
    pub bias: Parameter<F>,
}

#[derive(Debug, Clone)]
pub struct LstmCache<F> {
    reverse: bool,
    valid_len: usize,
    /// Post-activation gates per visited frame, `[L x 4H]` in visit order.
    gates: Vec<F>,
    /// Cell states per visited frame, `[L x H]`.
    cells: Vec<F>,
    /// `tanh(c_t)`, `[L x H]`.
    cells_tanh: Vec<F>,
    /// Hidden states per visited frame, `[L x H]`.
    hidden: Vec<F>,
}

#[inline]
fn sigmoid<F: Real>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

impl<F: Real> Lstm<F> {
    /// Uniform `±sqrt(1/H)` weights, zero bias except forget gate at 1.
    pub fn new<R: Rng + ?Sized>(d_in: usize, hidden: usize, rng: &mut R) -> Self {
        let limit = (1.0 / hidden as f64).sqrt();
        let mut bias = Parameter::zeros(&[4 * hidden]);
        bias.value.data_mut()[hidden..2 * hidden]
            .iter_mut()
            .for_each(|b| *b = F::one());
        Self {
            w_input: Parameter::uniform(&[d_in, 4 * hidden], limit, rng),
            w_hidden: Parameter::uniform(&[hidden, 4 * hidden], limit, rng),
            bias,
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hidden.shape()[0]
    }

    pub fn d_in(&self) -> usize {
        self.w_input.shape()[0]
    }

    /// Runs the recurrence over the first `valid_len` rows of `input`,
    /// writing `h_t` into columns `[offset, offset + H)` of `out`
    /// (row width `out_width`).
    fn run(
        &self,
        input: &Tensor<F>,
        valid_len: usize,
        reverse: bool,
        out: &mut [F],
        out_width: usize,
        offset: usize,
    ) -> LstmCache<F> {
        let h = self.hidden();
        let g4 = 4 * h;
        let l = valid_len;
        let mut xw = vec![F::zero(); l * g4];
        for r in 0..l {
            xw[r * g4..(r + 1) * g4].copy_from_slice(self.bias.value.data());
        }
        matmul(
            false,
            false,
            l,
            self.d_in(),
            g4,
            &input.data()[..l * self.d_in()],
            self.w_input.value.data(),
            F::one(),
            &mut xw,
        );

        let wh = self.w_hidden.value.data();
        let mut gates = vec![F::zero(); l * g4];
        let mut cells = vec![F::zero(); l * h];
        let mut cells_tanh = vec![F::zero(); l * h];
        let mut hidden = vec![F::zero(); l * h];
        let mut z = vec![F::zero(); g4];
        for step in 0..l {
            let t = if reverse { l - 1 - step } else { step };
            z.copy_from_slice(&xw[t * g4..(t + 1) * g4]);
            if step > 0 {
                let h_prev = &hidden[(step - 1) * h..step * h];
                for (j, &hj) in h_prev.iter().enumerate() {
                    let row = &wh[j * g4..(j + 1) * g4];
                    for (zk, &w) in z.iter_mut().zip(row) {
                        *zk += hj * w;
                    }
                }
            }
            let gate = &mut gates[step * g4..(step + 1) * g4];
            for k in 0..h {
                gate[k] = sigmoid(z[k]);
                gate[h + k] = sigmoid(z[h + k]);
                gate[2 * h + k] = z[2 * h + k].tanh();
                gate[3 * h + k] = sigmoid(z[3 * h + k]);
            }
            for k in 0..h {
                let c_prev = if step > 0 { cells[(step - 1) * h + k] } else { F::zero() };
                let c = gate[h + k] * c_prev + gate[k] * gate[2 * h + k];
                let ct = c.tanh();
                let hv = gate[3 * h + k] * ct;
                cells[step * h + k] = c;
                cells_tanh[step * h + k] = ct;
                hidden[step * h + k] = hv;
                out[t * out_width + offset + k] = hv;
            }
        }
        LstmCache {
            reverse,
            valid_len,
            gates,
            cells,
            cells_tanh,
            hidden,
        }
    }

    /// Backpropagation through time. `d_out` has row width `out_width` and
    /// this direction's slice starts at `offset`. Accumulates into
    /// `grads[0..3]` and adds the input gradient into `d_input`.
    #[allow(clippy::too_many_arguments)]
    fn backward_run(
        &self,
        cache: &LstmCache<F>,
        input: &Tensor<F>,
        d_out: &[F],
        out_width: usize,
        offset: usize,
        grads: &mut [Tensor<F>],
        d_input: &mut [F],
    ) {
        let h = self.hidden();
        let g4 = 4 * h;
        let l = cache.valid_len;
        let d_in = self.d_in();
        let wh = self.w_hidden.value.data();

        // dz indexed by time (not visit order) so the input-side GEMMs line up.
        let mut dz_time = vec![F::zero(); l * g4];
        let mut dh_next = vec![F::zero(); h];
        let mut dc_next = vec![F::zero(); h];
        let mut dz = vec![F::zero(); g4];
        for step in (0..l).rev() {
            let t = if cache.reverse { l - 1 - step } else { step };
            let gate = &cache.gates[step * g4..(step + 1) * g4];
            for k in 0..h {
                let dh = d_out[t * out_width + offset + k] + dh_next[k];
                let (i, f, g, o) = (gate[k], gate[h + k], gate[2 * h + k], gate[3 * h + k]);
                let ct = cache.cells_tanh[step * h + k];
                let c_prev = if step > 0 {
                    cache.cells[(step - 1) * h + k]
                } else {
                    F::zero()
                };
                let d_o = dh * ct;
                let dc = dh * o * (F::one() - ct * ct) + dc_next[k];
                let d_i = dc * g;
                let d_g = dc * i;
                let d_f = dc * c_prev;
                dc_next[k] = dc * f;
                dz[k] = d_i * i * (F::one() - i);
                dz[h + k] = d_f * f * (F::one() - f);
                dz[2 * h + k] = d_g * (F::one() - g * g);
                dz[3 * h + k] = d_o * o * (F::one() - o);
            }
            dz_time[t * g4..(t + 1) * g4].copy_from_slice(&dz);
            if step > 0 {
                let h_prev = &cache.hidden[(step - 1) * h..step * h];
                let dwh = grads[1].data_mut();
                for j in 0..h {
                    let row = &mut dwh[j * g4..(j + 1) * g4];
                    let hj = h_prev[j];
                    for (w, &d) in row.iter_mut().zip(&dz) {
                        *w += hj * d;
                    }
                }
                for j in 0..h {
                    let row = &wh[j * g4..(j + 1) * g4];
                    dh_next[j] = row.iter().zip(&dz).map(|(&w, &d)| w * d).sum();
                }
            }
        }
        let db = grads[2].data_mut();
        for row in dz_time.chunks(g4) {
            for (b, &d) in db.iter_mut().zip(row) {
                *b += d;
            }
        }
        matmul(
            true,
            false,
            d_in,
            l,
            g4,
            &input.data()[..l * d_in],
            &dz_time,
            F::one(),
            grads[0].data_mut(),
        );
        matmul(
            false,
            true,
            l,
            g4,
            d_in,
            &dz_time,
            self.w_input.value.data(),
            F::one(),
            &mut d_input[..l * d_in],
        );
    }
}

/// Forward and backward LSTMs whose outputs are concatenated per frame.
#[derive(Debug, Clone)]
pub struct Blstm<F> {
    pub forward: Lstm<F>,
    pub backward: Lstm<F>,
}

#[derive(Debug, Clone)]
pub struct BlstmCache<F> {
    input: Tensor<F>,
    fwd: LstmCache<F>,
    bwd: LstmCache<F>,
}

impl<F: Real> Blstm<F> {
    pub fn new<R: Rng + ?Sized>(d_in: usize, hidden: usize, rng: &mut R) -> Self {
        let forward = Lstm::new(d_in, hidden, rng);
        let backward = Lstm::new(d_in, hidden, rng);
        Self { forward, backward }
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden()
    }

    pub fn output_width(&self) -> usize {
        2 * self.hidden()
    }

    /// `[N x D] -> [N x 2H]`; rows at or beyond `valid_len` are zero.
    pub fn forward(&self, input: &Tensor<F>, valid_len: usize) -> Result<(Tensor<F>, BlstmCache<F>), NnError> {
        if input.shape().len() != 2 || input.dim(1) != self.forward.d_in() {
            return Err(NnError::Shape(format!(
                "blstm expects [N, {}], got {:?}",
                self.forward.d_in(),
                input.shape()
            )));
        }
        let n = input.dim(0);
        if n == 0 || valid_len == 0 || valid_len > n {
            return Err(NnError::ValidLength { valid_len, frames: n });
        }
        let width = self.output_width();
        let h = self.hidden();
        let mut out = vec![F::zero(); n * width];
        let fwd = self.forward.run(input, valid_len, false, &mut out, width, 0);
        let bwd = self.backward.run(input, valid_len, true, &mut out, width, h);
        Ok((
            Tensor::from_vec(&[n, width], out)?,
            BlstmCache {
                input: input.clone(),
                fwd,
                bwd,
            },
        ))
    }

    /// Accumulates into `grads[0..3]` (forward direction) and `grads[3..6]`
    /// (backward direction); returns the input gradient.
    pub fn backward(&self, cache: &BlstmCache<F>, d_out: &Tensor<F>, grads: &mut [Tensor<F>]) -> Tensor<F> {
        let width = self.output_width();
        let h = self.hidden();
        let mut dx = Tensor::zeros(cache.input.shape());
        let (g_fwd, g_bwd) = grads.split_at_mut(3);
        self.forward
            .backward_run(&cache.fwd, &cache.input, d_out.data(), width, 0, g_fwd, dx.data_mut());
        self.backward
            .backward_run(&cache.bwd, &cache.input, d_out.data(), width, h, g_bwd, dx.data_mut());
        dx
    }
}
