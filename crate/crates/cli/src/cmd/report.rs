use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Args;

use mosnet::data::load_ratings;
use mosnet::metrics::{format_table, histogram_svg, rating_distribution, reports_csv, EvalLevel, EvalReport};
use mosnet::RatingRecord;

use super::{path_flag, Common};
use crate::error::{CliError, CliResult, OrInvalid};
use crate::output::{csv_text, start_run, write};
use crate::settings::{optional, Key};

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
    /// Ratings CSV to summarise.
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    /// Comma-separated run directories (or metrics.csv files) to tabulate.
    #[arg(long)]
    pub runs: Option<String>,
}

const KEYS: [Key; 2] = [optional("ratings"), optional("runs")];

pub const UTTERANCE_STATS_HEADER: [&str; 4] = ["utterance_id", "mean", "std", "n_ratings"];

/// Per-utterance rating statistics and histograms of their means and
/// spreads.
pub fn write_distribution(dir: &Path, records: &[RatingRecord]) -> CliResult<()> {
    let dist = rating_distribution(records);
    write(&dir.join("mos_histogram.csv"), &dist.mean_hist.to_csv())?;
    write(&dir.join("std_histogram.csv"), &dist.std_hist.to_csv())?;
    write(
        &dir.join("mos_histogram.svg"),
        &histogram_svg(&dist.mean_hist, "Per-utterance mean rating", "MOS"),
    )?;
    write(
        &dir.join("std_histogram.svg"),
        &histogram_svg(&dist.std_hist, "Per-utterance rating spread", "standard deviation"),
    )?;
    write(
        &dir.join("utterance_stats.csv"),
        &csv_text(
            &UTTERANCE_STATS_HEADER,
            dist.utterances.iter().map(|u| {
                [
                    u.utterance_id.clone(),
                    format!("{:.6}", u.mean),
                    format!("{:.6}", u.std),
                    u.n.to_string(),
                ]
            }),
        ),
    )
}

/// Reads back a `metrics.csv` written by `evaluate`, `train` or `similarity`.
fn read_metrics(path: &Path) -> anyhow::Result<Vec<(String, EvalReport)>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let field = |i: usize| row.get(i).ok_or_else(|| anyhow!("{}: short row", path.display()));
        let num = |i: usize| -> anyhow::Result<f64> { Ok(field(i)?.parse()?) };
        let level = match field(1)? {
            "utterance" => EvalLevel::Utterance,
            "system" => EvalLevel::System,
            other => return Err(anyhow!("{}: unknown level '{other}'", path.display())),
        };
        let accuracy = match field(6)? {
            "" => None,
            a => Some(a.parse()?),
        };
        out.push((
            field(0)?.to_string(),
            EvalReport {
                level,
                n: field(2)?.parse()?,
                lcc: num(3)?,
                srcc: num(4)?,
                mse: num(5)?,
                accuracy,
            },
        ));
    }
    Ok(out)
}

pub fn run(args: &ReportArgs) -> CliResult<()> {
    let mut s = args.common.resolve(
        &KEYS,
        vec![("ratings", path_flag(&args.ratings)), ("runs", args.runs.clone())],
    )?;
    if s.get("ratings").is_none() && s.get("runs").is_none() {
        return Err(CliError::invalid("nothing to report: give ratings and/or runs"));
    }
    let records = s
        .parse_opt::<PathBuf>("ratings")?
        .map(|p| load_ratings(&p).or_invalid("reading ratings"))
        .transpose()?;
    let mut rows = Vec::new();
    for run in s.list::<PathBuf>("runs")?.unwrap_or_default() {
        let path = if run.is_dir() {
            run.join("metrics.csv")
        } else {
            run.clone()
        };
        let label = run
            .file_name()
            .filter(|_| run.is_dir())
            .map(|n| n.to_string_lossy().into_owned());
        for (name, r) in read_metrics(&path).or_invalid("reading run metrics")? {
            rows.push((label.clone().unwrap_or(name), r));
        }
    }

    let dir = start_run(&mut s, "report", args.common.overwrite)?;
    if let Some(records) = &records {
        write_distribution(&dir, records)?;
        println!("rating distribution written to {}", dir.display());
    }
    if !rows.is_empty() {
        let table = format_table(&rows);
        write(&dir.join("report.txt"), &table)?;
        write(&dir.join("report.csv"), &reports_csv(&rows))?;
        print!("{table}");
    }
    Ok(())
}
