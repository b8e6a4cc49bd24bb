use clap::{Args, ValueEnum};

use mosnet::bootstrap::synth_panel;
use mosnet::data::{save_ratings, synth_corpus, synth_pair_corpus};

use super::Common;
use crate::error::{CliError, CliResult, OrFailed, OrInvalid};
use crate::output::start_run;
use crate::settings::{value, Key};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    /// Audio with quality-dependent noise, MOS ratings and a manifest.
    Mos,
    /// Same/different-speaker pairs with labels.
    Pairs,
    /// Ratings only, from a listener panel with known structure.
    Panel,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    pub kind: Kind,
    #[command(flatten)]
    pub common: Common,
}

const KEYS: [Key; 9] = [
    value("n_systems", "10"),
    value("utterances_per_system", "10"),
    value("n_speakers", "8"),
    value("n_pairs", "200"),
    value("n_utterances", "400"),
    value("n_listeners", "20"),
    value("ratings_per_utterance", "4"),
    value("noise_sigma", "0.7"),
    value("panel_systems", "20"),
];

pub fn run(args: &SynthArgs) -> CliResult<()> {
    let mut s = args.common.resolve(&KEYS, vec![])?;
    if let Some(v) = args.kind.to_possible_value() {
        s.set("kind", v.get_name().to_string());
    }
    let seed: u64 = s.parse("seed")?;
    let positive = |key: &str| -> CliResult<usize> {
        let v: usize = s.parse(key)?;
        if v == 0 {
            return Err(CliError::invalid(format!("{key} must be positive")));
        }
        Ok(v)
    };
    match args.kind {
        Kind::Mos => {
            let (n_sys, per_sys) = (positive("n_systems")?, positive("utterances_per_system")?);
            let dir = start_run(&mut s, "synth", args.common.overwrite)?;
            let corpus = synth_corpus(n_sys, per_sys, seed);
            corpus.write_to(&dir).or_failed("writing corpus")?;
            println!(
                "{} utterances from {n_sys} systems written to {}",
                corpus.utterances.len(),
                dir.display()
            );
        }
        Kind::Pairs => {
            let (speakers, n_pairs) = (positive("n_speakers")?, positive("n_pairs")?);
            if speakers < 2 {
                return Err(CliError::invalid("n_speakers must be at least 2"));
            }
            let dir = start_run(&mut s, "synth", args.common.overwrite)?;
            synth_pair_corpus(speakers, n_pairs, seed)
                .write_to(&dir)
                .or_failed("writing pairs")?;
            println!("{n_pairs} pairs written to {}", dir.join("pairs.csv").display());
        }
        Kind::Panel => {
            let panel = synth_panel(
                positive("n_utterances")?,
                positive("panel_systems")?,
                positive("n_listeners")?,
                positive("ratings_per_utterance")?,
                s.parse("noise_sigma")?,
                seed,
            )
            .or_invalid("panel parameters")?;
            let dir = start_run(&mut s, "synth", args.common.overwrite)?;
            save_ratings(&dir.join("ratings.csv"), &panel.to_records()).or_failed("writing ratings")?;
            println!(
                "{} ratings written to {}",
                panel.ratings.len(),
                dir.join("ratings.csv").display()
            );
        }
    }
    Ok(())
}
