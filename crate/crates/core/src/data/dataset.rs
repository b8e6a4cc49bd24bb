use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use super::{DataError, RatingKind, RatingRecord};
use crate::rng::stream;

/// Mean rating of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub utterance_id: String,
    pub system_id: String,
    pub mean: f64,
    pub n_ratings: usize,
    pub is_natural: bool,
}

/// Per-utterance mean of every `kind` rating, ordered by utterance id.
/// Utterances without exactly four ratings are kept but logged.
pub fn ground_truth(records: &[RatingRecord], kind: RatingKind) -> Vec<GroundTruth> {
    let mut groups: BTreeMap<&str, (&RatingRecord, f64, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.kind == kind) {
        let e = groups.entry(&r.utterance_id).or_insert((r, 0.0, 0));
        e.1 += r.score;
        e.2 += 1;
    }
    let odd = groups.values().filter(|g| g.2 != 4).count();
    if odd > 0 {
        log::warn!("{odd} utterances do not have exactly four {kind} ratings; using the mean of what exists");
    }
    groups
        .into_iter()
        .map(|(utt, (first, sum, n))| GroundTruth {
            utterance_id: utt.to_string(),
            system_id: first.system_id.clone(),
            mean: sum / n as f64,
            n_ratings: n,
            is_natural: first.is_natural,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceSample {
    pub utterance_id: String,
    pub system_id: String,
    pub audio_path: PathBuf,
    pub ground_truth: f64,
    pub split: Option<Split>,
}

/// Joins ground truth with a manifest; every utterance must have audio.
pub fn build_samples(
    truth: &[GroundTruth],
    manifest: &BTreeMap<String, PathBuf>,
) -> Result<Vec<UtteranceSample>, DataError> {
    let missing: Vec<&str> = truth
        .iter()
        .filter(|g| !manifest.contains_key(&g.utterance_id))
        .map(|g| g.utterance_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(DataError::MissingAudio(missing.join(", ")));
    }
    Ok(truth
        .iter()
        .map(|g| UtteranceSample {
            utterance_id: g.utterance_id.clone(),
            system_id: g.system_id.clone(),
            audio_path: manifest[&g.utterance_id].clone(),
            ground_truth: g.mean,
            split: None,
        })
        .collect())
}

/// Reads an `utterance_id,audio_path` CSV. Relative paths are resolved
/// against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<BTreeMap<String, PathBuf>, DataError> {
    let file = std::fs::File::open(path).map_err(|e| DataError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.clone();
    let find = |name: &'static str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or(DataError::MissingColumn(name))
    };
    let (iu, ip) = (find("utterance_id")?, find("audio_path")?);
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let id = row.get(iu).unwrap_or("").to_string();
        let audio = PathBuf::from(row.get(ip).unwrap_or(""));
        if id.is_empty() || audio.as_os_str().is_empty() {
            return Err(DataError::Parse {
                line,
                message: "empty utterance_id or audio_path".into(),
            });
        }
        let audio = if audio.is_absolute() { audio } else { base.join(audio) };
        if out.insert(id.clone(), audio).is_some() {
            return Err(DataError::Parse {
                line,
                message: format!("utterance '{id}' listed twice"),
            });
        }
    }
    if out.is_empty() {
        return Err(DataError::Empty(path.display().to_string()));
    }
    Ok(out)
}

/// Writes `utterance_id,audio_path`, storing paths relative to the manifest
/// directory when possible.
pub fn save_manifest<'a>(path: &Path, entries: impl IntoIterator<Item = (&'a str, &'a Path)>) -> Result<(), DataError> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["utterance_id", "audio_path"])?;
    for (id, audio) in entries {
        let rel = audio.strip_prefix(base).unwrap_or(audio);
        w.write_record([id, &rel.to_string_lossy()])?;
    }
    w.flush().map_err(|e| DataError::io(path, e))?;
    Ok(())
}

/// Indices of each part of a split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitAssignment {
    /// Split of every sample index; `None` for unassigned ones.
    pub fn labels(&self, n: usize) -> Vec<Option<Split>> {
        let mut out = vec![None; n];
        for (part, split) in [
            (&self.train, Split::Train),
            (&self.val, Split::Val),
            (&self.test, Split::Test),
        ] {
            for &i in part {
                out[i] = Some(split);
            }
        }
        out
    }
}

/// Uniformly random disjoint train/val/test assignment of `n_samples`
/// indices, deterministic in `seed`.
pub fn split_dataset(n_samples: usize, counts: [usize; 3], seed: u64) -> Result<SplitAssignment, DataError> {
    if counts.iter().sum::<usize>() > n_samples {
        return Err(DataError::SplitCounts {
            requested: counts,
            available: n_samples,
        });
    }
    let mut order: Vec<usize> = (0..n_samples).collect();
    order.shuffle(&mut stream(seed, "split", 0));
    let (train, rest) = order.split_at(counts[0]);
    let (val, rest) = rest.split_at(counts[1]);
    let test = &rest[..counts[2]];
    let sorted = |s: &[usize]| {
        let mut v = s.to_vec();
        v.sort_unstable();
        v
    };
    Ok(SplitAssignment {
        train: sorted(train),
        val: sorted(val),
        test: sorted(test),
    })
}

/// Scales `ratios` to `total`: each part gets the floor of its share and the
/// remainder goes to the first part.
pub fn proportional_counts(total: usize, ratios: [usize; 3]) -> [usize; 3] {
    let sum: usize = ratios.iter().sum();
    assert!(sum > 0, "ratios must not all be zero");
    let mut out = ratios.map(|r| (total as u128 * r as u128 / sum as u128) as usize);
    out[0] += total - out.iter().sum::<usize>();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(utt: &str, listener: &str, score: f64) -> RatingRecord {
        RatingRecord {
            utterance_id: utt.into(),
            system_id: "S1".into(),
            listener_id: listener.into(),
            kind: RatingKind::Mos,
            score,
            is_natural: false,
        }
    }

    #[test]
    fn ground_truth_is_mean_of_ratings() {
        let records: Vec<_> = [2.0, 3.0, 3.0, 4.0]
            .iter()
            .enumerate()
            .map(|(i, &s)| rec("u1", &format!("l{i}"), s))
            .collect();
        let gt = ground_truth(&records, RatingKind::Mos);
        assert_eq!(gt.len(), 1);
        assert_eq!(gt[0].mean, 3.0);
        assert_eq!(gt[0].n_ratings, 4);
        assert!(ground_truth(&records, RatingKind::Similarity).is_empty());
    }

    #[test]
    fn proportional_rule_on_2058_samples() {
        assert_eq!(proportional_counts(2058, [13580, 3000, 4000]), [1358, 300, 400]);
        assert_eq!(proportional_counts(20580, [13580, 3000, 4000]), [13580, 3000, 4000]);
        assert_eq!(proportional_counts(10, [1, 1, 1]).iter().sum::<usize>(), 10);
    }

    #[test]
    fn full_partition_and_determinism() {
        let a = split_dataset(50, [30, 10, 10], 7).unwrap();
        let b = split_dataset(50, [30, 10, 10], 7).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = [a.train.clone(), a.val.clone(), a.test.clone()].concat();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        assert_ne!(a, split_dataset(50, [30, 10, 10], 8).unwrap());
    }

    #[test]
    fn oversized_split_fails() {
        assert!(matches!(
            split_dataset(10, [5, 5, 1], 0),
            Err(DataError::SplitCounts { .. })
        ));
    }

    #[test]
    fn manifest_round_trip_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let wav = dir.path().join("wav").join("a.wav");
        let path = dir.path().join("manifest.csv");
        save_manifest(&path, [("a", wav.as_path())]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("wav/a.wav") && !text.contains(&*dir.path().to_string_lossy()));
        let m = load_manifest(&path).unwrap();
        assert_eq!(m["a"], wav);
    }

    #[test]
    fn missing_audio_lists_offenders() {
        let gt = ground_truth(&[rec("u1", "l", 3.0), rec("u2", "l", 4.0)], RatingKind::Mos);
        let manifest = BTreeMap::from([("u1".to_string(), PathBuf::from("u1.wav"))]);
        match build_samples(&gt, &manifest) {
            Err(DataError::MissingAudio(ids)) => assert_eq!(ids, "u2"),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn splits_are_disjoint_with_exact_sizes(n in 0usize..300, a in 0.0f64..1.0, b in 0.0f64..1.0, seed in 0u64..50) {
            let train = (n as f64 * a * 0.6) as usize;
            let val = ((n - train) as f64 * b * 0.5) as usize;
            let test = n - train - val - (n - train - val) / 3;
            let s = split_dataset(n, [train, val, test], seed).unwrap();
            prop_assert_eq!((s.train.len(), s.val.len(), s.test.len()), (train, val, test));
            let labels = s.labels(n);
            prop_assert_eq!(labels.iter().filter(|l| l.is_some()).count(), train + val + test);
        }
    }
}
