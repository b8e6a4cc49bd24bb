use std::fmt::Write;

use clap::Args;

use mosnet::data::{
    build_samples, ground_truth, load_manifest, load_ratings, proportional_counts, split_dataset, Split,
};
use mosnet::metrics::{evaluate, format_table, reports_csv};
use mosnet::models::build_model;
use mosnet::training::{predict_set, save_checkpoint, train, Example};
use mosnet::{Architecture, Model, RatingKind};

use super::{features_all, model_config, path_flag, training_config, Common, MODEL_KEYS, TRAINING_KEYS};
use crate::error::{CliError, CliResult, OrFailed, OrInvalid};
use crate::output::{start_run, write};
use crate::settings::{required, value, Key};

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Ratings CSV.
    #[arg(long)]
    pub ratings: Option<std::path::PathBuf>,
    /// utterance_id,audio_path CSV.
    #[arg(long)]
    pub manifest: Option<std::path::PathBuf>,
    /// blstm, cnn or cnn-blstm.
    #[arg(long)]
    pub architecture: Option<String>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
}

const KEYS: [Key; 4] = [
    required("ratings"),
    required("manifest"),
    value("architecture", "cnn-blstm"),
    value("split", "13580,3000,4000"),
];

pub fn run(args: &TrainArgs) -> CliResult<()> {
    let schema: Vec<Key> = KEYS.iter().chain(&MODEL_KEYS).chain(&TRAINING_KEYS).copied().collect();
    let mut s = args.common.resolve(
        &schema,
        vec![
            ("ratings", path_flag(&args.ratings)),
            ("manifest", path_flag(&args.manifest)),
            ("architecture", args.architecture.clone()),
            ("batch_size", args.batch_size.map(|v| v.to_string())),
            ("alpha", args.alpha.map(|v| v.to_string())),
            ("max_epochs", args.max_epochs.map(|v| v.to_string())),
        ],
    )?;
    let arch: Architecture = s.parse("architecture")?;
    if arch.is_similarity() {
        return Err(CliError::invalid(format!(
            "'{arch}' is a similarity network; use the similarity command"
        )));
    }
    let model_cfg = model_config(&s, arch)?;
    let train_cfg = training_config(&s)?;
    let ratios: Vec<usize> = s.list("split")?.unwrap_or_default();
    let ratios: [usize; 3] = ratios
        .try_into()
        .ok()
        .filter(|r: &[usize; 3]| r[0] > 0 && r[1] > 0)
        .ok_or_else(|| CliError::invalid("split must be three counts train,val,test with train and val > 0"))?;

    let records = load_ratings(&s.path("ratings")?).or_invalid("reading ratings")?;
    let manifest = load_manifest(&s.path("manifest")?).or_invalid("reading manifest")?;
    let truth = ground_truth(&records, RatingKind::Mos);
    let mut samples = build_samples(&truth, &manifest).or_invalid("joining ratings with manifest")?;
    let counts = proportional_counts(samples.len(), ratios);
    if counts[0] == 0 || counts[1] == 0 {
        return Err(CliError::invalid(format!(
            "{} utterances are too few for split {ratios:?}",
            samples.len()
        )));
    }
    let assignment = split_dataset(samples.len(), counts, train_cfg.seed).or_invalid("splitting")?;
    let labels = assignment.labels(samples.len());
    for (sample, split) in samples.iter_mut().zip(labels) {
        sample.split = split;
    }
    let paths: Vec<&std::path::Path> = samples.iter().map(|u| u.audio_path.as_path()).collect();
    let feats = features_all(&paths)?;
    let mut sets: [Vec<Example<f32>>; 3] = Default::default();
    for (u, f) in samples.iter().zip(feats) {
        let slot = match u.split {
            Some(Split::Train) => 0,
            Some(Split::Val) => 1,
            Some(Split::Test) => 2,
            None => continue,
        };
        sets[slot].push(Example {
            id: u.utterance_id.clone(),
            system_id: u.system_id.clone(),
            features: f,
            target: u.ground_truth as f32,
        });
    }

    let dir = start_run(&mut s, "train", args.common.overwrite)?;
    let mut split_csv = String::from("utterance_id,system_id,split,ground_truth\n");
    for u in &samples {
        if let Some(split) = u.split {
            let _ = writeln!(
                split_csv,
                "{},{},{split},{}",
                u.utterance_id, u.system_id, u.ground_truth
            );
        }
    }
    write(&dir.join("split.csv"), &split_csv)?;

    log::info!(
        "training {arch} on {} utterances ({} validation, {} test)",
        sets[0].len(),
        sets[1].len(),
        sets[2].len()
    );
    let model = build_model::<f32>(&model_cfg, train_cfg.seed)
        .or_invalid("building model")?
        .into_mos()
        .expect("MOS architecture");
    let (model, history) = train(model, &sets[0], &sets[1], &train_cfg).or_failed("training")?;
    let best = history.best();
    log::info!(
        "stopped ({}) after {} epochs; best epoch {} with validation MSE {:.4}",
        history.stop_reason.name(),
        history.epochs.len(),
        best.epoch,
        best.val_mse
    );
    write(&dir.join("history.csv"), &history.to_csv(false))?;
    write(&dir.join("history_timing.csv"), &history.to_csv(true))?;
    let model = Model::from(model);
    save_checkpoint(&model, &dir.join("model.ckpt")).or_failed("saving checkpoint")?;
    let model = model.into_mos().expect("MOS model");

    if !sets[2].is_empty() {
        let preds = predict_set(&model, &sets[2]).or_failed("scoring the test set")?;
        let mut csv = String::from("utterance_id,system_id,predicted_mos,ground_truth\n");
        let mut triples = Vec::with_capacity(preds.len());
        for (e, p) in sets[2].iter().zip(&preds) {
            let _ = writeln!(csv, "{},{},{p:.6},{}", e.id, e.system_id, e.target);
            triples.push((e.system_id.as_str(), *p, f64::from(e.target)));
        }
        write(&dir.join("test_predictions.csv"), &csv)?;
        if triples.len() >= 2 {
            match evaluate(&triples) {
                Ok(reports) => {
                    let named: Vec<(String, _)> = reports.into_iter().map(|r| ("test".to_string(), r)).collect();
                    write(&dir.join("metrics.csv"), &reports_csv(&named))?;
                    print!("{}", format_table(&named));
                }
                Err(e) => log::warn!("test-set metrics unavailable: {e}"),
            }
        }
    }
    println!("checkpoint written to {}", dir.join("model.ckpt").display());
    Ok(())
}
