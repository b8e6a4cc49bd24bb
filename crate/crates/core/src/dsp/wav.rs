use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{resample, DspError, Waveform, SAMPLE_RATE_HZ};

/// Reads a RIFF/WAVE file, averaging channels, without resampling.
pub fn read_wav(path: &Path) -> Result<Waveform, DspError> {
    let read_err = |source| DspError::Read {
        path: path.to_path_buf(),
        source,
    };
    let reader = WavReader::open(path).map_err(read_err)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(DspError::Unsupported {
            path: path.to_path_buf(),
            detail: "zero channels".into(),
        });
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(read_err)?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<Result<_, _>>()
                .map_err(read_err)?
        }
        (format, bits) => {
            return Err(DspError::Unsupported {
                path: path.to_path_buf(),
                detail: format!("{format:?} with {bits} bits per sample"),
            })
        }
    };
    if interleaved.is_empty() {
        return Err(DspError::Empty);
    }
    let mono = interleaved
        .chunks(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    Waveform::new(mono, spec.sample_rate)
}

/// Reads a WAV file as 16 kHz mono audio in `[-1, 1]`.
pub fn load_waveform(path: &Path) -> Result<Waveform, DspError> {
    let w = read_wav(path)?;
    resample(&w, SAMPLE_RATE_HZ)
}

/// Writes 16-bit PCM mono with the same `2^15` scale [`read_wav`] divides by.
pub fn write_wav(path: &Path, w: &Waveform) -> Result<(), DspError> {
    let write_err = |source| DspError::Write {
        path: path.to_path_buf(),
        source,
    };
    let spec = WavSpec {
        channels: 1,
        sample_rate: w.sample_rate_hz(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(write_err)?;
    for &s in w.samples() {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(write_err)?;
    }
    writer.finalize().map_err(write_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::stft_magnitude;
    use std::f64::consts::PI;

    fn write_with(path: &Path, spec: WavSpec, frames: &[Vec<f64>]) {
        let mut w = WavWriter::create(path, spec).unwrap();
        for frame in frames {
            for &s in frame {
                match (spec.sample_format, spec.bits_per_sample) {
                    (SampleFormat::Float, _) => w.write_sample(s as f32).unwrap(),
                    (SampleFormat::Int, 8) => w.write_sample((s * 127.0).round() as i8).unwrap(),
                    (SampleFormat::Int, 16) => w.write_sample((s * 32767.0).round() as i16).unwrap(),
                    (SampleFormat::Int, 24) => w.write_sample((s * 8_388_607.0).round() as i32).unwrap(),
                    _ => unreachable!(),
                }
            }
        }
        w.finalize().unwrap();
    }

    fn spec(rate: u32, channels: u16, bits: u16, format: SampleFormat) -> WavSpec {
        WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: bits,
            sample_format: format,
        }
    }

    #[test]
    fn silence_at_16k_loads_unchanged() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("silence.wav");
        write_with(&path, spec(16_000, 1, 16, SampleFormat::Int), &vec![vec![0.0]; 16_000]);
        let w = load_waveform(&path).unwrap();
        assert_eq!(w.sample_rate_hz(), 16_000);
        assert_eq!(w.len(), 16_000);
        assert!(w.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn one_second_at_48k_becomes_16000_samples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("48k.wav");
        write_with(&path, spec(48_000, 1, 24, SampleFormat::Int), &vec![vec![0.1]; 48_000]);
        let w = load_waveform(&path).unwrap();
        assert_eq!(w.len(), 16_000);
        assert_eq!(w.sample_rate_hz(), 16_000);
    }

    #[test]
    fn resampled_tone_lands_in_native_bin() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tone.wav");
        let tone = |rate: f64, n: usize| (2.0 * PI * 440.0 * n as f64 / rate).sin() * 0.5;
        let frames: Vec<Vec<f64>> = (0..48_000).map(|n| vec![tone(48_000.0, n)]).collect();
        write_with(&path, spec(48_000, 1, 32, SampleFormat::Float), &frames);
        let loaded = stft_magnitude(&load_waveform(&path).unwrap()).unwrap();
        let native = Waveform::new((0..16_000).map(|n| tone(16_000.0, n)).collect(), 16_000).unwrap();
        let native = stft_magnitude(&native).unwrap();
        let peak = |f: &[f64]| {
            f.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        };
        for t in 2..loaded.n_frames() - 2 {
            assert_eq!(peak(loaded.frame(t)), peak(native.frame(t)));
        }
    }

    #[test]
    fn stereo_is_averaged() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        write_with(
            &path,
            spec(16_000, 2, 16, SampleFormat::Int),
            &vec![vec![0.5, -0.25]; 100],
        );
        let w = read_wav(&path).unwrap();
        assert_eq!(w.len(), 100);
        for &s in w.samples() {
            assert!((s - 0.125).abs() < 1e-4);
        }
    }

    #[test]
    fn eight_bit_pcm_is_normalized() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("8bit.wav");
        write_with(&path, spec(8_000, 1, 8, SampleFormat::Int), &vec![vec![0.5]; 64]);
        let w = read_wav(&path).unwrap();
        assert!(w.samples().iter().all(|&s| (s - 64.0 / 128.0).abs() < 1e-9));
    }

    #[test]
    fn zero_length_audio_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.wav");
        write_with(&path, spec(16_000, 1, 16, SampleFormat::Int), &[]);
        assert!(matches!(load_waveform(&path), Err(DspError::Empty)));
    }

    #[test]
    fn unreadable_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.wav");
        std::fs::write(&path, b"not a wave file").unwrap();
        assert!(matches!(load_waveform(&path), Err(DspError::Read { .. })));
        assert!(load_waveform(&dir.path().join("missing.wav")).is_err());
    }

    #[test]
    fn write_then_read_round_trips_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.wav");
        let w = Waveform::new((0..600).map(|n| (n as f64 * 0.01).sin() * 0.8).collect(), 16_000).unwrap();
        write_wav(&path, &w).unwrap();
        let r = read_wav(&path).unwrap();
        for (a, b) in w.samples().iter().zip(r.samples()) {
            assert!((a - b).abs() < 1.0 / 32767.0);
        }
    }
}
