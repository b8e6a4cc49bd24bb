use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rayon::prelude::*;

use mosnet::data::{load_pair_paths, load_pairs, load_ratings, merge_similarity_labels, split_pairs, SimilarityPair};
use mosnet::metrics::{format_table, reports_csv, EvalLevel, EvalReport};
use mosnet::models::build_model;
use mosnet::training::{load_checkpoint, save_checkpoint, train_similarity, PairExample};
use mosnet::{Architecture, Model, SimilarityNet};

use super::{features_all, model_config, path_flag, training_config, Common, MODEL_KEYS, TRAINING_KEYS};
use crate::error::{CliError, CliResult, OrFailed, OrInvalid};
use crate::output::{csv_text, start_run, write};
use crate::settings::{optional, required, value, Key};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Action {
    Train,
    Eval,
}

#[derive(Debug, Clone, Args)]
pub struct SimilarityArgs {
    pub action: Action,
    #[command(flatten)]
    pub common: Common,
    /// pair_id,path_a,path_b[,label] CSV.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Similarity ratings to derive labels from (train only).
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    /// scalar or 2class.
    #[arg(long)]
    pub head: Option<String>,
    /// Checkpoint to evaluate.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

const KEYS: [Key; 5] = [
    required("pairs"),
    optional("ratings"),
    optional("checkpoint"),
    value("head", "scalar"),
    value("train_fraction", "0.8"),
];

pub const PREDICTIONS_HEADER: [&str; 4] = ["pair_id", "p_same", "predicted_label", "label"];

fn architecture(head: &str) -> CliResult<Architecture> {
    match head {
        "scalar" => Ok(Architecture::SimilarityScalar),
        "2class" => Ok(Architecture::SimilarityTwoClass),
        other => Err(CliError::invalid(format!(
            "head '{other}' is neither scalar nor 2class"
        ))),
    }
}

fn examples(pairs: &[SimilarityPair]) -> CliResult<Vec<PairExample<f32>>> {
    let mut unique: Vec<&Path> = pairs
        .iter()
        .flat_map(|p| [p.path_a.as_path(), p.path_b.as_path()])
        .collect();
    unique.sort();
    unique.dedup();
    let feats: BTreeMap<&Path, _> = unique.iter().copied().zip(features_all(&unique)?).collect();
    Ok(pairs
        .iter()
        .map(|p| PairExample {
            a: feats[p.path_a.as_path()].clone(),
            b: feats[p.path_b.as_path()].clone(),
            label: p.label,
        })
        .collect())
}

/// `(P(same), predicted label)` per pair, eval mode.
fn score(model: &SimilarityNet<f32>, set: &[PairExample<f32>]) -> CliResult<Vec<(f64, u8)>> {
    set.par_iter()
        .map(|p| {
            let out = model.predict(&p.a, p.a.dim(0), &p.b, p.b.dim(0))?;
            Ok((f64::from(out.same_probability()), out.label()))
        })
        .collect::<Result<_, mosnet::ModelError>>()
        .or_failed("scoring pairs")
}

/// Accuracy of the predicted labels plus LCC, SRCC and MSE of `P(same)`
/// against the 0/1 labels.
pub fn similarity_report(scored: &[(f64, u8)], labels: &[u8]) -> CliResult<EvalReport> {
    let probs: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let truth: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let mut report = EvalReport::compute(EvalLevel::Utterance, &probs, &truth)
        .or_invalid("similarity metrics need both labels and varying predictions")?;
    let correct = scored.iter().zip(labels).filter(|(s, &l)| s.1 == l).count();
    report.accuracy = Some(correct as f64 / labels.len() as f64);
    Ok(report)
}

fn write_evaluation(dir: &Path, name: &str, pairs: &[SimilarityPair], scored: &[(f64, u8)]) -> CliResult<()> {
    write(
        &dir.join("predictions.csv"),
        &csv_text(
            &PREDICTIONS_HEADER,
            pairs.iter().zip(scored).map(|(p, s)| {
                [
                    p.pair_id.clone(),
                    format!("{:.6}", s.0),
                    s.1.to_string(),
                    p.label.to_string(),
                ]
            }),
        ),
    )?;
    let labels: Vec<u8> = pairs.iter().map(|p| p.label).collect();
    let named = vec![(name.to_string(), similarity_report(scored, &labels)?)];
    write(&dir.join("metrics.csv"), &reports_csv(&named))?;
    let table = format_table(&named);
    write(&dir.join("report.txt"), &table)?;
    print!("{table}");
    Ok(())
}

pub fn run(args: &SimilarityArgs) -> CliResult<()> {
    let mut s = args.common.resolve(
        &KEYS
            .iter()
            .chain(&MODEL_KEYS)
            .chain(&TRAINING_KEYS)
            .copied()
            .collect::<Vec<_>>(),
        vec![
            ("pairs", path_flag(&args.pairs)),
            ("ratings", path_flag(&args.ratings)),
            ("head", args.head.clone()),
            ("checkpoint", path_flag(&args.checkpoint)),
        ],
    )?;
    match args.action {
        Action::Train => train(&mut s, args.common.overwrite),
        Action::Eval => eval(&mut s, args.common.overwrite),
    }
}

fn train(s: &mut crate::settings::Settings, overwrite: bool) -> CliResult<()> {
    let head: String = s.parse("head")?;
    let model_cfg = model_config(s, architecture(&head)?)?;
    let train_cfg = training_config(s)?;
    let fraction: f64 = s.parse("train_fraction")?;
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CliError::invalid(format!("train_fraction {fraction} outside (0, 1)")));
    }
    let pairs_path = s.path("pairs")?;
    let pairs = match s.parse_opt::<PathBuf>("ratings")? {
        Some(r) => {
            let records = load_ratings(&r).or_invalid("reading ratings")?;
            let paths = load_pair_paths(&pairs_path).or_invalid("reading pairs")?;
            merge_similarity_labels(&records, &paths).or_invalid("labelling pairs")?
        }
        None => load_pairs(&pairs_path).or_invalid("reading pairs")?,
    };
    let (train_pairs, val_pairs) = split_pairs(&pairs, fraction, train_cfg.seed);
    if train_pairs.is_empty() || val_pairs.is_empty() {
        return Err(CliError::invalid(format!(
            "{} pairs are too few for train_fraction {fraction}",
            pairs.len()
        )));
    }
    let train_set = examples(&train_pairs)?;
    let val_set = examples(&val_pairs)?;

    let dir = start_run(s, "similarity", overwrite)?;
    log::info!(
        "training {head} head on {} pairs ({} held out)",
        train_set.len(),
        val_set.len()
    );
    let model = build_model::<f32>(&model_cfg, train_cfg.seed)
        .or_invalid("building model")?
        .into_similarity()
        .expect("similarity architecture");
    let (model, history) = train_similarity(model, &train_set, &val_set, &train_cfg).or_failed("training")?;
    write(&dir.join("history.csv"), &history.to_csv(false))?;
    write(&dir.join("history_timing.csv"), &history.to_csv(true))?;
    let scored = score(&model, &val_set)?;
    let model = Model::from(model);
    save_checkpoint(&model, &dir.join("model.ckpt")).or_failed("saving checkpoint")?;
    write_evaluation(&dir, &format!("{head}-heldout"), &val_pairs, &scored)?;
    println!("checkpoint written to {}", dir.join("model.ckpt").display());
    Ok(())
}

fn eval(s: &mut crate::settings::Settings, overwrite: bool) -> CliResult<()> {
    let ckpt: PathBuf = s
        .parse_opt("checkpoint")?
        .ok_or_else(|| CliError::invalid("similarity eval needs a checkpoint"))?;
    let model: SimilarityNet<f32> = load_checkpoint(&ckpt)
        .or_invalid("loading checkpoint")?
        .into_similarity()
        .ok_or_else(|| CliError::invalid("checkpoint holds a MOS model; use predict"))?;
    let pairs = load_pairs(&s.path("pairs")?).or_invalid("reading pairs")?;
    let set = examples(&pairs)?;
    let head = match model.head() {
        mosnet::SimilarityHead::Scalar => "scalar",
        mosnet::SimilarityHead::TwoClass => "2class",
    };
    s.set("head", head.to_string());
    let dir = start_run(s, "similarity", overwrite)?;
    let scored = score(&model, &set)?;
    write_evaluation(&dir, head, &pairs, &scored)
}
