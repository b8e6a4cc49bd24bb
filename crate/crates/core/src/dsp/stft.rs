use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{DspError, Waveform, FRAME_SHIFT, FRAME_SIZE, N_BINS};
use crate::nn::{Real, Tensor};

/// Per-utterance `[N x 257]` matrix of STFT magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    data: Vec<f64>,
    n_frames: usize,
}

impl Spectrogram {
    pub const FRAME_SHIFT_S: f64 = 0.016;
    pub const FRAME_SIZE_S: f64 = 0.032;

    pub fn from_frames(n_frames: usize, data: Vec<f64>) -> Result<Self, DspError> {
        if n_frames == 0 || data.len() != n_frames * N_BINS {
            return Err(DspError::Empty);
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(DspError::NonFinite(i));
        }
        Ok(Self { data, n_frames })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        N_BINS
    }

    pub fn frame(&self, index: usize) -> &[f64] {
        &self.data[index * N_BINS..(index + 1) * N_BINS]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Model input tensor `[N x 257]`.
    pub fn to_tensor<F: Real>(&self) -> Tensor<F> {
        let data = self.data.iter().map(|&v| F::lit(v)).collect();
        Tensor::from_vec(&[self.n_frames, N_BINS], data).expect("shape matches")
    }

    /// Debug dump: one row per frame, 257 comma-separated columns.
    pub fn write_csv(&self, path: &Path) -> Result<(), DspError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for t in 0..self.n_frames {
            let row: Vec<String> = self.frame(t).iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Periodic Hann window of `len` points.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
        .collect()
}

fn plan() -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(FRAME_SIZE)
}

/// Magnitudes of the 512-point DFT of Hann-windowed segments starting at
/// 0, 256, 512, ...; bins 0..=256 are kept.
pub fn stft_magnitude(w: &Waveform) -> Result<Spectrogram, DspError> {
    let x = w.samples();
    if x.len() < FRAME_SIZE {
        return Err(DspError::TooShort {
            len: x.len(),
            frame: FRAME_SIZE,
        });
    }
    let n_frames = 1 + (x.len() - FRAME_SIZE) / FRAME_SHIFT;
    let window = hann_window(FRAME_SIZE);
    let fft = plan();
    let mut scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex::default(); FRAME_SIZE];
    let mut data = Vec::with_capacity(n_frames * N_BINS);
    for t in 0..n_frames {
        let seg = &x[t * FRAME_SHIFT..t * FRAME_SHIFT + FRAME_SIZE];
        for ((b, &s), &wv) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new(s * wv, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        data.extend(buf[..N_BINS].iter().map(|c| c.norm()));
    }
    Ok(Spectrogram { data, n_frames })
}
