use std::path::PathBuf;

use clap::Args;

use mosnet::data::load_ratings;
use mosnet::{inherent_predictability, ListenerPanel};

use super::report::write_distribution;
use super::{path_flag, Common};
use crate::error::{CliError, CliResult, OrFailed, OrInvalid};
use crate::output::{start_run, write};
use crate::settings::{required, value, Key};

#[derive(Debug, Clone, Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub common: Common,
    /// Ratings CSV.
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Share of the listener pool drawn per replication, in (0, 1].
    #[arg(long)]
    pub subset_fraction: Option<f64>,
}

const KEYS: [Key; 3] = [
    required("ratings"),
    value("replications", "1000"),
    value("subset_fraction", "0.5"),
];

/// Listeners drawn per replication: the rounded fraction, at least one.
pub fn subset_size(fraction: f64, n_listeners: usize) -> usize {
    ((fraction * n_listeners as f64).round() as usize).clamp(1, n_listeners)
}

pub fn run(args: &BootstrapArgs) -> CliResult<()> {
    let mut s = args.common.resolve(
        &KEYS,
        vec![
            ("ratings", path_flag(&args.ratings)),
            ("replications", args.replications.map(|v| v.to_string())),
            ("subset_fraction", args.subset_fraction.map(|v| v.to_string())),
        ],
    )?;
    let replications: usize = s.parse("replications")?;
    let fraction: f64 = s.parse("subset_fraction")?;
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CliError::invalid(format!("subset_fraction {fraction} outside (0, 1]")));
    }
    if replications == 0 {
        return Err(CliError::invalid("replications must be positive"));
    }
    let seed: u64 = s.parse("seed")?;
    let records = load_ratings(&s.path("ratings")?).or_invalid("reading ratings")?;
    let panel = ListenerPanel::from_records(&records).or_invalid("building listener panel")?;
    let subset = subset_size(fraction, panel.n_listeners());

    let dir = start_run(&mut s, "bootstrap", args.common.overwrite)?;
    let report = inherent_predictability(&panel, replications, subset, seed).or_failed("bootstrap")?;
    write(&dir.join("summary.csv"), &report.summary_csv())?;
    write(&dir.join("replications.csv"), &report.raw_csv())?;
    let table = report.to_table();
    write(&dir.join("report.txt"), &table)?;
    write_distribution(&dir, &records)?;
    print!("{table}");
    Ok(())
}
