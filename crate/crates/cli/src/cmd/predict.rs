use std::fmt::Write;
use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;

use mosnet::data::load_manifest;
use mosnet::dsp::Spectrogram;
use mosnet::training::load_checkpoint;
use mosnet::MosNet;

use super::{features, path_flag, Common};
use crate::error::{CliError, CliResult, OrInvalid};
use crate::output::{csv_text, start_run, write};
use crate::settings::{required, Key};

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// utterance_id,audio_path CSV.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

const KEYS: [Key; 2] = [required("checkpoint"), required("manifest")];

pub const PREDICTIONS_HEADER: [&str; 5] = ["utterance_id", "predicted_mos", "n_frames", "trace_path", "error"];

/// Outcome for one manifest row.
struct Row {
    id: String,
    result: Result<(f64, Vec<f64>), String>,
}

fn trace_csv(scores: &[f64]) -> String {
    let mut out = String::from("frame,time_s,score\n");
    for (t, s) in scores.iter().enumerate() {
        let _ = writeln!(out, "{t},{:.3},{s:.9}", t as f64 * Spectrogram::FRAME_SHIFT_S);
    }
    out
}

pub fn run(args: &PredictArgs) -> CliResult<()> {
    let mut s = args.common.resolve(
        &KEYS,
        vec![
            ("checkpoint", path_flag(&args.checkpoint)),
            ("manifest", path_flag(&args.manifest)),
        ],
    )?;
    let model: MosNet<f32> = load_checkpoint(&s.path("checkpoint")?)
        .or_invalid("loading checkpoint")?
        .into_mos()
        .ok_or_else(|| CliError::invalid("checkpoint holds a similarity network; use `similarity eval`"))?;
    let manifest = load_manifest(&s.path("manifest")?).or_invalid("reading manifest")?;
    let dir = start_run(&mut s, "predict", args.common.overwrite)?;
    let trace_dir = dir.join("traces");
    std::fs::create_dir_all(&trace_dir).map_err(|e| CliError::Failed(e.into()))?;

    let entries: Vec<(&String, &PathBuf)> = manifest.iter().collect();
    let rows: Vec<Row> = entries
        .par_iter()
        .map(|(id, path)| {
            let result = features(path)
                .map_err(|e| format!("{}: {e}", path.display()))
                .and_then(|x| {
                    let p = model.predict(&x, x.dim(0)).map_err(|e| e.to_string())?;
                    let frames: Vec<f64> = p.frame_scores.iter().map(|&v| f64::from(v)).collect();
                    Ok((f64::from(p.utterance_score), frames))
                });
            Row {
                id: (*id).clone(),
                result,
            }
        })
        .collect();

    let mut table = Vec::with_capacity(rows.len());
    let mut failures = 0;
    for row in &rows {
        match &row.result {
            Ok((score, frames)) => {
                let rel = format!("traces/{}.csv", row.id);
                write(&dir.join(&rel), &trace_csv(frames))?;
                table.push([
                    row.id.clone(),
                    format!("{score:.6}"),
                    frames.len().to_string(),
                    rel,
                    String::new(),
                ]);
            }
            Err(e) => {
                failures += 1;
                log::error!("{}: {e}", row.id);
                table.push([row.id.clone(), String::new(), String::new(), String::new(), e.clone()]);
            }
        }
    }
    write(&dir.join("predictions.csv"), &csv_text(&PREDICTIONS_HEADER, table))?;
    println!(
        "{} of {} utterances scored; predictions in {}",
        rows.len() - failures,
        rows.len(),
        dir.join("predictions.csv").display()
    );
    if failures > 0 {
        return Err(CliError::Failed(anyhow::anyhow!(
            "{failures} utterance(s) could not be scored"
        )));
    }
    Ok(())
}
