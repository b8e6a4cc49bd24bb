use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{DataError, RatingKind, RatingRecord};
use crate::rng::stream;
use rand::seq::SliceRandom;

/// Two utterances and whether listeners judged them the same speaker (1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimilarityPair {
    pub pair_id: String,
    pub path_a: PathBuf,
    pub path_b: PathBuf,
    pub label: u8,
}

/// Scores 1 and 2 mean "same speaker" (label 1), 3 and 4 "different" (0).
pub fn similarity_label(score: f64) -> Result<u8, DataError> {
    match score {
        s if s == 1.0 || s == 2.0 => Ok(1),
        s if s == 3.0 || s == 4.0 => Ok(0),
        s => Err(DataError::SimilarityScore(s)),
    }
}

/// One labelled pair per similarity rating. `pair_paths` maps the rating's
/// `utterance_id` (the pair id) to the two audio files.
pub fn merge_similarity_labels(
    records: &[RatingRecord],
    pair_paths: &BTreeMap<String, (PathBuf, PathBuf)>,
) -> Result<Vec<SimilarityPair>, DataError> {
    let sim: Vec<&RatingRecord> = records.iter().filter(|r| r.kind == RatingKind::Similarity).collect();
    let mut missing: Vec<&str> = sim
        .iter()
        .filter(|r| !pair_paths.contains_key(&r.utterance_id))
        .map(|r| r.utterance_id.as_str())
        .collect();
    missing.dedup();
    if !missing.is_empty() {
        return Err(DataError::MissingAudio(missing.join(", ")));
    }
    sim.into_iter()
        .map(|r| {
            let (a, b) = &pair_paths[&r.utterance_id];
            Ok(SimilarityPair {
                pair_id: r.utterance_id.clone(),
                path_a: a.clone(),
                path_b: b.clone(),
                label: similarity_label(r.score)?,
            })
        })
        .collect()
}

/// Random split with `round(train_fraction * n)` pairs in the first part.
pub fn split_pairs(
    pairs: &[SimilarityPair],
    train_fraction: f64,
    seed: u64,
) -> (Vec<SimilarityPair>, Vec<SimilarityPair>) {
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut stream(seed, "pair-split", 0));
    let n_train = ((pairs.len() as f64) * train_fraction).round() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&i| pairs[i].clone()).collect();
    (pick(&order[..n_train]), pick(&order[n_train..]))
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = PathBuf::from(p);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

type PairRow = (String, PathBuf, PathBuf, Option<u8>);

/// Reads `pair_id,path_a,path_b[,label]`. Rows without a label column get
/// `None`.
fn read_pair_rows(path: &Path) -> Result<Vec<PairRow>, DataError> {
    let file = std::fs::File::open(path).map_err(|e| DataError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.clone();
    let find = |name: &'static str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or(DataError::MissingColumn(name))
    };
    let (ii, ia, ib) = (find("pair_id")?, find("path_a")?, find("path_b")?);
    let il = headers.iter().position(|h| h == "label");
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let label = match il {
            Some(i) => match row.get(i).unwrap_or("") {
                "0" => Some(0),
                "1" => Some(1),
                other => {
                    return Err(DataError::Parse {
                        line,
                        message: format!("label '{other}' is not 0 or 1"),
                    })
                }
            },
            None => None,
        };
        out.push((
            row.get(ii).unwrap_or("").to_string(),
            resolve(base, row.get(ia).unwrap_or("")),
            resolve(base, row.get(ib).unwrap_or("")),
            label,
        ));
    }
    if out.is_empty() {
        return Err(DataError::Empty(path.display().to_string()));
    }
    Ok(out)
}

/// Pair-id to audio-path map from a pairs CSV (labels ignored).
pub fn load_pair_paths(path: &Path) -> Result<BTreeMap<String, (PathBuf, PathBuf)>, DataError> {
    Ok(read_pair_rows(path)?
        .into_iter()
        .map(|(id, a, b, _)| (id, (a, b)))
        .collect())
}

/// Labelled pairs; the CSV must carry a `label` column.
pub fn load_pairs(path: &Path) -> Result<Vec<SimilarityPair>, DataError> {
    read_pair_rows(path)?
        .into_iter()
        .map(|(pair_id, path_a, path_b, label)| {
            Ok(SimilarityPair {
                pair_id,
                path_a,
                path_b,
                label: label.ok_or(DataError::MissingColumn("label"))?,
            })
        })
        .collect()
}

pub fn save_pairs(path: &Path, pairs: &[SimilarityPair]) -> Result<(), DataError> {
    let base = path.parent().unwrap_or(Path::new("."));
    let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).to_string_lossy().into_owned();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["pair_id", "path_a", "path_b", "label"])?;
    for p in pairs {
        w.write_record([p.pair_id.clone(), rel(&p.path_a), rel(&p.path_b), p.label.to_string()])?;
    }
    w.flush().map_err(|e| DataError::io(path, e))?;
    Ok(())
}
