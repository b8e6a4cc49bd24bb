//! Audio ingestion and magnitude-spectrogram features.
//!
//! Utterances are brought to 16 kHz mono and analysed with a 512-point
//! Hann-windowed STFT hopped every 256 samples, giving 257 raw magnitude
//! bins per frame. There is no centering, log compression or normalization.

mod resample;
mod stft;
mod wav;

pub use resample::resample;
pub use stft::{hann_window, stft_magnitude, Spectrogram};
pub use wav::{load_waveform, read_wav, write_wav};

use std::path::PathBuf;

pub const SAMPLE_RATE_HZ: u32 = 16_000;
pub const FRAME_SIZE: usize = 512;
pub const FRAME_SHIFT: usize = 256;
pub const N_BINS: usize = FRAME_SIZE / 2 + 1;

#[derive(Debug, thiserror::Error)]
pub enum DspError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
    #[error("unsupported encoding in {path}: {detail}")]
    Unsupported { path: PathBuf, detail: String },
    #[error("audio is empty")]
    Empty,
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("sample rate must be positive, got {0}")]
    InvalidRate(u32),
    #[error("waveform has {len} samples, fewer than one {frame}-sample frame")]
    TooShort { len: usize, frame: usize },
    #[error("cannot write spectrogram CSV: {0}")]
    Io(#[from] std::io::Error),
}

/// Mono audio at a known sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self, DspError> {
        if sample_rate_hz == 0 {
            return Err(DspError::InvalidRate(sample_rate_hz));
        }
        if samples.is_empty() {
            return Err(DspError::Empty);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(DspError::NonFinite(i));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}
