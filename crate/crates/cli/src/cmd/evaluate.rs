use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::Args;

use mosnet::data::{ground_truth, read_ratings};
use mosnet::metrics::{evaluate, format_table, reports_csv, scatter_svg, system_aggregate};
use mosnet::RatingKind;

use super::{path_flag, report_line, Common};
use crate::error::{CliError, CliResult, OrInvalid};
use crate::output::{csv_text, start_run, write};
use crate::settings::{required, value, Key};

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    /// CSV with utterance_id and predicted_mos columns.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Ratings CSV, or a CSV with utterance_id, system_id and mos columns.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

const KEYS: [Key; 4] = [
    required("predictions"),
    required("truth"),
    value("name", "model"),
    // Ignore ground-truth utterances that have no prediction.
    value("allow_subset", "false"),
];

pub const UTTERANCE_SCATTER_HEADER: [&str; 4] = ["utterance_id", "system_id", "predicted_mos", "true_mos"];
pub const SYSTEM_SCATTER_HEADER: [&str; 4] = ["system_id", "n_utterances", "predicted_mos", "true_mos"];

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> anyhow::Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| anyhow!("{} has no '{name}' column", path.display()))
}

/// `utterance_id -> predicted MOS`; rows with an empty prediction are kept
/// as `None` so they can be reported.
fn read_predictions(path: &Path) -> anyhow::Result<BTreeMap<String, Option<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let (iu, ip) = (
        column(&headers, "utterance_id", path)?,
        column(&headers, "predicted_mos", path)?,
    );
    let mut out = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let id = row.get(iu).unwrap_or("").to_string();
        let raw = row.get(ip).unwrap_or("");
        let value = if raw.is_empty() {
            None
        } else {
            Some(
                raw.parse::<f64>()
                    .with_context(|| format!("prediction '{raw}' for {id}"))?,
            )
        };
        if out.insert(id.clone(), value).is_some() {
            bail!("utterance '{id}' predicted twice");
        }
    }
    Ok(out)
}

/// `utterance_id -> (system_id, MOS)` from a ratings CSV or a plain
/// ground-truth CSV.
fn read_truth(path: &Path) -> anyhow::Result<BTreeMap<String, (String, f64)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let header = text.lines().next().unwrap_or("");
    if header.split(',').any(|h| h.trim() == "listener_id") {
        let records = read_ratings(text.as_bytes(), &path.display().to_string())?;
        return Ok(ground_truth(&records, RatingKind::Mos)
            .into_iter()
            .map(|g| (g.utterance_id, (g.system_id, g.mean)))
            .collect());
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let iu = column(&headers, "utterance_id", path)?;
    let is = column(&headers, "system_id", path)?;
    let im = column(&headers, "mos", path)?;
    let mut out = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let mos: f64 = row.get(im).unwrap_or("").parse().context("mos column")?;
        out.insert(
            row.get(iu).unwrap_or("").to_string(),
            (row.get(is).unwrap_or("").to_string(), mos),
        );
    }
    Ok(out)
}

pub fn run(args: &EvaluateArgs) -> CliResult<()> {
    let mut s = args.common.resolve(
        &KEYS,
        vec![
            ("predictions", path_flag(&args.predictions)),
            ("truth", path_flag(&args.truth)),
        ],
    )?;
    let preds = read_predictions(&s.path("predictions")?).or_invalid("reading predictions")?;
    let truth = read_truth(&s.path("truth")?).or_invalid("reading ground truth")?;
    let allow_subset = s.flag("allow_subset")?;

    let mut offenders: Vec<String> = Vec::new();
    for (id, p) in &preds {
        if !truth.contains_key(id) {
            offenders.push(format!("{id} (no ground truth)"));
        } else if p.is_none() {
            offenders.push(format!("{id} (empty prediction)"));
        }
    }
    if !allow_subset {
        offenders.extend(
            truth
                .keys()
                .filter(|id| !preds.contains_key(*id))
                .map(|id| format!("{id} (no prediction)")),
        );
    }
    if !offenders.is_empty() {
        return Err(CliError::invalid(format!(
            "{} mismatched utterance id(s): {}",
            offenders.len(),
            offenders.join(", ")
        )));
    }
    let triples: Vec<(String, f64, f64, String)> = preds
        .iter()
        .map(|(id, p)| {
            let (sys, mos) = &truth[id];
            (sys.clone(), p.expect("checked above"), *mos, id.clone())
        })
        .collect();
    let per_utt: Vec<(&str, f64, f64)> = triples.iter().map(|t| (t.0.as_str(), t.1, t.2)).collect();
    let reports = evaluate(&per_utt).or_invalid("computing metrics")?;
    let name: String = s.parse("name")?;
    let named: Vec<(String, _)> = reports.iter().map(|r| (name.clone(), r.clone())).collect();

    let dir = start_run(&mut s, "evaluate", args.common.overwrite)?;
    write(&dir.join("metrics.csv"), &reports_csv(&named))?;
    let table = format_table(&named);
    write(&dir.join("report.txt"), &table)?;
    write(
        &dir.join("scatter_utterance.csv"),
        &csv_text(
            &UTTERANCE_SCATTER_HEADER,
            triples
                .iter()
                .map(|(sys, p, t, id)| [id.clone(), sys.clone(), format!("{p:.6}"), format!("{t:.6}")]),
        ),
    )?;
    let systems = system_aggregate(&per_utt);
    write(
        &dir.join("scatter_system.csv"),
        &csv_text(
            &SYSTEM_SCATTER_HEADER,
            systems.iter().map(|m| {
                [
                    m.system_id.clone(),
                    m.n.to_string(),
                    format!("{:.6}", m.prediction),
                    format!("{:.6}", m.ground_truth),
                ]
            }),
        ),
    )?;
    let utt_points: Vec<(f64, f64)> = triples.iter().map(|t| (t.2, t.1)).collect();
    let sys_points: Vec<(f64, f64)> = systems.iter().map(|m| (m.ground_truth, m.prediction)).collect();
    write(
        &dir.join("scatter_utterance.svg"),
        &scatter_svg(&utt_points, "Utterance level", "true MOS", "predicted MOS"),
    )?;
    write(
        &dir.join("scatter_system.svg"),
        &scatter_svg(&sys_points, "System level", "true MOS", "predicted MOS"),
    )?;
    print!("{table}");
    for r in &reports {
        log::debug!("{}", report_line(&name, r));
    }
    Ok(())
}
