use super::{DspError, Waveform};

/// Zero crossings of the sinc on each side of the kernel centre.
const ZERO_CROSSINGS: f64 = 24.0;
const KAISER_BETA: f64 = 8.0;
/// Passband edge as a fraction of the lower rate's Nyquist frequency.
const CUTOFF_FRACTION: f64 = 0.9;

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Band-limited resampling with a Kaiser-windowed sinc kernel.
///
/// Output length is `round(len * target / source)`. Each output sample is
/// normalized by its kernel sum so DC passes with unit gain.
pub fn resample(w: &Waveform, target_rate_hz: u32) -> Result<Waveform, DspError> {
    if target_rate_hz == 0 {
        return Err(DspError::InvalidRate(target_rate_hz));
    }
    let source = w.sample_rate_hz();
    if source == target_rate_hz {
        return Ok(w.clone());
    }
    let x = w.samples();
    let out_len = ((x.len() as f64 * target_rate_hz as f64) / source as f64).round() as usize;
    if out_len == 0 {
        return Err(DspError::Empty);
    }
    let cutoff_hz = CUTOFF_FRACTION * source.min(target_rate_hz) as f64 / 2.0;
    // Cutoff in cycles per input sample.
    let nu = cutoff_hz / source as f64;
    let half_width = ZERO_CROSSINGS / (2.0 * nu);
    let i0_beta = bessel_i0(KAISER_BETA);
    let kernel = |tau: f64| {
        let r = tau / half_width;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let window = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta;
        2.0 * nu * sinc(2.0 * nu * tau) * window
    };
    let step = source as f64 / target_rate_hz as f64;
    let samples = (0..out_len)
        .map(|j| {
            let t = j as f64 * step;
            let lo = (t - half_width).ceil() as i64;
            let hi = (t + half_width).floor() as i64;
            let mut acc = 0.0;
            let mut norm = 0.0;
            for k in lo..=hi {
                let h = kernel(t - k as f64);
                norm += h;
                if k >= 0 && (k as usize) < x.len() {
                    acc += x[k as usize] * h;
                }
            }
            acc / norm
        })
        .collect();
    Waveform::new(samples, target_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(freq: f64, rate: u32, len: usize) -> Waveform {
        let s = (0..len)
            .map(|n| (2.0 * PI * freq * n as f64 / rate as f64).sin())
            .collect();
        Waveform::new(s, rate).unwrap()
    }

    #[test]
    fn same_rate_is_identity() {
        let w = sine(300.0, 22_050, 1000);
        assert_eq!(resample(&w, 22_050).unwrap(), w);
    }

    #[test]
    fn zero_rate_is_rejected() {
        let w = sine(300.0, 16_000, 100);
        assert!(matches!(resample(&w, 0), Err(DspError::InvalidRate(0))));
    }

    #[test]
    fn output_length_follows_rate_ratio() {
        let w = Waveform::new(vec![0.0; 48_000], 48_000).unwrap();
        assert_eq!(resample(&w, 16_000).unwrap().len(), 16_000);
        let w = Waveform::new(vec![0.0; 1001], 44_100).unwrap();
        assert_eq!(resample(&w, 16_000).unwrap().len(), 363);
        let w = Waveform::new(vec![0.0; 800], 8_000).unwrap();
        assert_eq!(resample(&w, 16_000).unwrap().len(), 1600);
    }

    #[test]
    fn dc_passes_unchanged() {
        let w = Waveform::new(vec![0.5; 4800], 48_000).unwrap();
        let y = resample(&w, 16_000).unwrap();
        let edge = 200;
        for &v in &y.samples()[edge..y.len() - edge] {
            assert!((v - 0.5).abs() < 1e-3, "{v}");
        }
    }

    #[test]
    fn downsampled_sine_tracks_analytic_sine() {
        let w = sine(1000.0, 48_000, 48_000);
        let y = resample(&w, 16_000).unwrap();
        let reference = sine(1000.0, 16_000, y.len());
        let trim = 300;
        let a = &y.samples()[trim..y.len() - trim];
        let b = &reference.samples()[trim..y.len() - trim];
        let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
        let na: f64 = a.iter().map(|p| p * p).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|q| q * q).sum::<f64>().sqrt();
        let corr = dot / (na * nb);
        assert!(corr > 0.999, "correlation {corr}");
    }

    #[test]
    fn removes_content_above_new_nyquist() {
        // 10 kHz is above the 8 kHz Nyquist frequency of the 16 kHz output.
        let w = sine(10_000.0, 48_000, 48_000);
        let y = resample(&w, 16_000).unwrap();
        let trim = 300;
        let rms =
            (y.samples()[trim..y.len() - trim].iter().map(|v| v * v).sum::<f64>() / (y.len() - 2 * trim) as f64).sqrt();
        assert!(rms < 1e-3, "alias rms {rms}");
    }

    #[test]
    fn bessel_matches_known_values() {
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-12);
        assert!((bessel_i0(8.0) - 427.564_115_721_804_7).abs() < 1e-8);
    }
}
