//! Rating ingestion, per-utterance ground truth, dataset splits, similarity
//! label merging and synthetic desk-scale corpora.

mod dataset;
mod ratings;
mod similarity;
mod synth;

pub use dataset::{
    build_samples, ground_truth, load_manifest, proportional_counts, save_manifest, split_dataset, GroundTruth, Split,
    SplitAssignment, UtteranceSample,
};
pub use ratings::{load_ratings, read_ratings, save_ratings, write_ratings, RatingKind, RatingRecord};
pub use similarity::{
    load_pair_paths, load_pairs, merge_similarity_labels, save_pairs, similarity_label, split_pairs, SimilarityPair,
};
pub use synth::{synth_corpus, synth_pair_corpus, SynthCorpus, SynthPair, SynthPairCorpus, SynthUtterance};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}: no data rows")]
    Empty(String),
    #[error("missing column '{0}'")]
    MissingColumn(&'static str),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: {kind} score {score} outside {lo}..={hi}")]
    ScoreRange {
        line: u64,
        kind: RatingKind,
        score: f64,
        lo: f64,
        hi: f64,
    },
    #[error("duplicate rating by listener '{listener}' for '{utterance}' ({kind})")]
    Duplicate {
        listener: String,
        utterance: String,
        kind: RatingKind,
    },
    #[error("similarity score {0} is not one of 1, 2, 3, 4")]
    SimilarityScore(f64),
    #[error("split counts {requested:?} exceed the {available} available samples")]
    SplitCounts { requested: [usize; 3], available: usize },
    #[error("no audio path for utterance(s): {0}")]
    MissingAudio(String),
    #[error(transparent)]
    Dsp(#[from] crate::dsp::DspError),
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }
}
