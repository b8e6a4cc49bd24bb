//! `mosnet`: train, apply and evaluate MOS predictors from the command line.

mod cmd;
mod error;
mod output;
mod settings;

use clap::{Parser, Subcommand};

use cmd::bootstrap::BootstrapArgs;
use cmd::evaluate::EvaluateArgs;
use cmd::predict::PredictArgs;
use cmd::report::ReportArgs;
use cmd::similarity::SimilarityArgs;
use cmd::synth::SynthArgs;
use cmd::train::TrainArgs;
use error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "mosnet", version, about = "Predict mean opinion scores of converted speech")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a MOS predictor on rated audio.
    Train(TrainArgs),
    /// Score audio with a trained MOS predictor.
    Predict(PredictArgs),
    /// Compare predictions with ground truth at utterance and system level.
    Evaluate(EvaluateArgs),
    /// Estimate how predictable listener scores are from their own halves.
    Bootstrap(BootstrapArgs),
    /// Train or evaluate a same-speaker predictor.
    Similarity(SimilarityArgs),
    /// Generate a synthetic corpus, pair set or listener panel.
    Synth(SynthArgs),
    /// Summarise ratings and tabulate finished runs.
    Report(ReportArgs),
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(error::CliError::invalid("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| error::CliError::Failed(e.into()))?;
    }
    match &cli.command {
        Command::Train(a) => cmd::train::run(a),
        Command::Predict(a) => cmd::predict::run(a),
        Command::Evaluate(a) => cmd::evaluate::run(a),
        Command::Bootstrap(a) => cmd::bootstrap::run(a),
        Command::Similarity(a) => cmd::similarity::run(a),
        Command::Synth(a) => cmd::synth::run(a),
        Command::Report(a) => cmd::report::run(a),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
