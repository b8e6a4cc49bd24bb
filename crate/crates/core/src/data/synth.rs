use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{save_manifest, save_pairs, save_ratings, DataError, RatingKind, RatingRecord, SimilarityPair};
use crate::dsp::{write_wav, Waveform, SAMPLE_RATE_HZ};
use crate::rng::{stream, Rng64};

const SIGNAL_RMS: f64 = 0.05;
const LISTENER_POOL: usize = 16;
const RATINGS_PER_UTTERANCE: usize = 4;
const RATING_NOISE: f64 = 0.5;
const UTTERANCE_JITTER: f64 = 0.03;

/// One generated utterance and its pseudo-listener ratings.
#[derive(Debug, Clone)]
pub struct SynthUtterance {
    pub utterance_id: String,
    pub system_id: String,
    /// Quality parameter of the system, in `[0, 1]`.
    pub rho_system: f64,
    /// Quality of this utterance: the system value plus a small jitter.
    pub rho: f64,
    pub snr_db: f64,
    pub waveform: Waveform,
    pub ratings: Vec<f64>,
    pub ground_truth: f64,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub utterances: Vec<SynthUtterance>,
    pub records: Vec<RatingRecord>,
}

/// Harmonic tone at `f0` with `1/k^tilt` harmonic amplitudes (optionally
/// boosted around `formant_hz`), scaled to [`SIGNAL_RMS`], plus white noise
/// at `snr_db`.
fn harmonic_tone(rng: &mut Rng64, n: usize, f0: f64, tilt: f64, formant_hz: Option<f64>, snr_db: f64) -> Vec<f64> {
    let sr = f64::from(SAMPLE_RATE_HZ);
    let mut x = vec![0.0; n];
    let mut k = 1;
    while k as f64 * f0 < 0.45 * sr {
        let freq = k as f64 * f0;
        let mut amp = (k as f64).powf(-tilt);
        if let Some(fc) = formant_hz {
            amp *= 1.0 + 4.0 * (-((freq - fc) / 300.0).powi(2)).exp();
        }
        let phase = rng.random_range(0.0..TAU);
        let w = TAU * freq / sr;
        for (i, v) in x.iter_mut().enumerate() {
            *v += amp * (w * i as f64 + phase).sin();
        }
        k += 1;
    }
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let noise = Normal::new(0.0, SIGNAL_RMS * 10f64.powf(-snr_db / 20.0)).expect("finite sigma");
    x.iter_mut()
        .for_each(|v| *v = (*v * SIGNAL_RMS / rms + noise.sample(rng)).clamp(-1.0, 1.0));
    x
}

/// Builds `n_systems` synthetic systems of increasing quality. System `s`
/// gets `rho_s` drawn uniformly from `[s/n, (s+1)/n)`; its utterances are
/// 0.5 to 1.5 s harmonic tones in white noise at `SNR = -10 + 50 * rho` dB,
/// and four integer ratings `round(1 + 4 * rho + N(0, 0.5))`, clamped to
/// 1..=5, come from distinct pseudo-listeners.
pub fn synth_corpus(n_systems: usize, utterances_per_system: usize, seed: u64) -> SynthCorpus {
    let jitter = Normal::new(0.0, UTTERANCE_JITTER).expect("finite sigma");
    let rating_noise = Normal::new(0.0, RATING_NOISE).expect("finite sigma");
    let mut utterances = Vec::with_capacity(n_systems * utterances_per_system);
    let mut records = Vec::new();
    for s in 0..n_systems {
        let system_id = format!("sys{s:02}");
        let rho_system = (s as f64 + stream(seed, "synth-system", s as u64).random::<f64>()) / n_systems as f64;
        for u in 0..utterances_per_system {
            let mut rng = stream(seed, "synth-utterance", (s * utterances_per_system + u) as u64);
            let utterance_id = format!("{system_id}_u{u:03}");
            let rho = (rho_system + jitter.sample(&mut rng)).clamp(0.0, 1.0);
            let snr_db = -10.0 + 50.0 * rho;
            let n = (rng.random_range(0.5..1.5) * f64::from(SAMPLE_RATE_HZ)) as usize;
            let f0 = rng.random_range(100.0..250.0);
            let samples = harmonic_tone(&mut rng, n, f0, 1.0, None, snr_db);
            let waveform = Waveform::new(samples, SAMPLE_RATE_HZ).expect("finite samples");
            let listeners = sample(&mut rng, LISTENER_POOL, RATINGS_PER_UTTERANCE);
            let mut ratings = Vec::with_capacity(RATINGS_PER_UTTERANCE);
            for l in listeners.iter() {
                let score = (1.0 + 4.0 * rho + rating_noise.sample(&mut rng))
                    .round()
                    .clamp(1.0, 5.0);
                ratings.push(score);
                records.push(RatingRecord {
                    utterance_id: utterance_id.clone(),
                    system_id: system_id.clone(),
                    listener_id: format!("L{l:02}"),
                    kind: RatingKind::Mos,
                    score,
                    is_natural: false,
                });
            }
            let ground_truth = ratings.iter().sum::<f64>() / ratings.len() as f64;
            utterances.push(SynthUtterance {
                utterance_id,
                system_id: system_id.clone(),
                rho_system,
                rho,
                snr_db,
                waveform,
                ratings,
                ground_truth,
            });
        }
    }
    SynthCorpus { utterances, records }
}

fn write_waveform(dir: &Path, name: &str, w: &Waveform) -> Result<PathBuf, DataError> {
    let path = dir.join(format!("{name}.wav"));
    write_wav(&path, w)?;
    Ok(path)
}

impl SynthCorpus {
    pub fn system_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.utterances.iter().map(|u| u.system_id.clone()).collect();
        ids.dedup();
        ids
    }

    /// Writes `wav/<id>.wav`, `ratings.csv`, `manifest.csv` and
    /// `systems.csv` (`system_id,rho`) under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), DataError> {
        let wav_dir = dir.join("wav");
        std::fs::create_dir_all(&wav_dir).map_err(|e| DataError::io(&wav_dir, e))?;
        let mut paths = Vec::with_capacity(self.utterances.len());
        for u in &self.utterances {
            paths.push(write_waveform(&wav_dir, &u.utterance_id, &u.waveform)?);
        }
        save_ratings(&dir.join("ratings.csv"), &self.records)?;
        save_manifest(
            &dir.join("manifest.csv"),
            self.utterances
                .iter()
                .zip(&paths)
                .map(|(u, p)| (u.utterance_id.as_str(), p.as_path())),
        )?;
        let mut w = csv::Writer::from_path(dir.join("systems.csv"))?;
        w.write_record(["system_id", "rho"])?;
        let mut last = None;
        for u in &self.utterances {
            if last != Some(&u.system_id) {
                w.write_record([u.system_id.clone(), format!("{:.6}", u.rho_system)])?;
                last = Some(&u.system_id);
            }
        }
        w.flush().map_err(|e| DataError::io(dir, e))?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthPair {
    pub pair_id: String,
    pub speaker_a: usize,
    pub speaker_b: usize,
    pub a: Waveform,
    pub b: Waveform,
    /// 1 when both utterances come from the same speaker.
    pub label: u8,
}

#[derive(Debug, Clone)]
pub struct SynthPairCorpus {
    pub pairs: Vec<SynthPair>,
}

/// A pseudo-speaker: fundamental frequency, spectral tilt and one formant.
struct Voice {
    f0: f64,
    tilt: f64,
    formant_hz: f64,
}

fn voices(n: usize, seed: u64) -> Vec<Voice> {
    let mut rng = stream(seed, "synth-voices", 0);
    let mut formants: Vec<f64> = (0..n).map(|k| 500.0 + 2000.0 * k as f64 / n.max(2) as f64).collect();
    use rand::seq::SliceRandom;
    formants.shuffle(&mut rng);
    (0..n)
        .map(|k| Voice {
            f0: 90.0 * (300.0f64 / 90.0).powf(k as f64 / (n.max(2) - 1) as f64),
            tilt: rng.random_range(0.6..1.4),
            formant_hz: formants[k],
        })
        .collect()
}

/// Balanced same/different-speaker pairs. Each speaker has its own
/// harmonic structure (geometrically spaced pitch, tilt, formant); each
/// utterance perturbs pitch by up to 3% and adds noise at 30 dB SNR.
pub fn synth_pair_corpus(n_speakers: usize, n_pairs: usize, seed: u64) -> SynthPairCorpus {
    assert!(n_speakers >= 2, "need two speakers for different-speaker pairs");
    let voices = voices(n_speakers, seed);
    let utter = |rng: &mut Rng64, v: &Voice| {
        let n = (rng.random_range(0.5..1.0) * f64::from(SAMPLE_RATE_HZ)) as usize;
        let f0 = v.f0 * rng.random_range(0.97..1.03);
        Waveform::new(
            harmonic_tone(rng, n, f0, v.tilt, Some(v.formant_hz), 30.0),
            SAMPLE_RATE_HZ,
        )
        .expect("finite samples")
    };
    let pairs = (0..n_pairs)
        .map(|i| {
            let mut rng = stream(seed, "synth-pair", i as u64);
            let same = i % 2 == 0;
            let sa = rng.random_range(0..n_speakers);
            let sb = if same {
                sa
            } else {
                (sa + rng.random_range(1..n_speakers)) % n_speakers
            };
            SynthPair {
                pair_id: format!("pair{i:04}"),
                speaker_a: sa,
                speaker_b: sb,
                a: utter(&mut rng, &voices[sa]),
                b: utter(&mut rng, &voices[sb]),
                label: u8::from(same),
            }
        })
        .collect();
    SynthPairCorpus { pairs }
}

impl SynthPairCorpus {
    /// Writes `wav/<pair>_{a,b}.wav` and `pairs.csv` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<SimilarityPair>, DataError> {
        let wav_dir = dir.join("wav");
        std::fs::create_dir_all(&wav_dir).map_err(|e| DataError::io(&wav_dir, e))?;
        let mut out = Vec::with_capacity(self.pairs.len());
        for p in &self.pairs {
            out.push(SimilarityPair {
                pair_id: p.pair_id.clone(),
                path_a: write_waveform(&wav_dir, &format!("{}_a", p.pair_id), &p.a)?,
                path_b: write_waveform(&wav_dir, &format!("{}_b", p.pair_id), &p.b)?,
                label: p.label,
            });
        }
        save_pairs(&dir.join("pairs.csv"), &out)?;
        Ok(out)
    }
}
