pub mod bootstrap;
pub mod evaluate;
pub mod predict;
pub mod report;
pub mod similarity;
pub mod synth;
pub mod train;

use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;

use mosnet::dsp::{load_waveform, stft_magnitude};
use mosnet::metrics::EvalReport;
use mosnet::nn::Tensor;
use mosnet::{Architecture, ModelConfig, TrainingConfig};

use crate::error::{CliError, CliResult};
use crate::settings::{optional, value, Key, Settings};

/// Flags shared by every command.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// key=value settings file ('#' starts a comment).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Overrides one setting; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory (default: $MOSNET_OUTPUT_ROOT/<command> or runs/<command>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replace an existing output directory from a previous run.
    #[arg(long)]
    pub overwrite: bool,
}

impl Common {
    pub fn resolve(&self, schema: &[Key], mut flags: Vec<(&'static str, Option<String>)>) -> CliResult<Settings> {
        flags.push(("out", self.out.as_ref().map(|p| p.display().to_string())));
        flags.push(("seed", self.seed.map(|s| s.to_string())));
        Settings::resolve(schema, self.config.as_deref(), &self.set, flags)
    }
}

pub fn path_flag(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

/// Network widths; absent keys keep the architecture's defaults.
pub const MODEL_KEYS: [Key; 4] = [
    optional("channels"),
    optional("blstm_hidden"),
    optional("fc_hidden"),
    value("dropout_rate", "0.3"),
];

pub const TRAINING_KEYS: [Key; 6] = [
    value("batch_size", "64"),
    value("alpha", "1"),
    value("learning_rate", "1e-4"),
    value("patience", "5"),
    value("max_epochs", "100"),
    value("mask_padding", "true"),
];

pub fn model_config(s: &Settings, architecture: Architecture) -> CliResult<ModelConfig> {
    let mut cfg = ModelConfig::new(architecture);
    if let Some(ch) = s.list("channels")? {
        cfg.channels = ch;
    }
    if let Some(h) = s.parse_opt("blstm_hidden")? {
        cfg.blstm_hidden = h;
    }
    if let Some(h) = s.parse_opt("fc_hidden")? {
        cfg.fc_hidden = h;
    }
    cfg.dropout_rate = s.parse("dropout_rate")?;
    cfg.validate().map_err(CliError::invalid)?;
    Ok(cfg)
}

pub fn training_config(s: &Settings) -> CliResult<TrainingConfig> {
    let cfg = TrainingConfig {
        alpha: s.parse("alpha")?,
        batch_size: s.parse("batch_size")?,
        learning_rate: s.parse("learning_rate")?,
        patience_epochs: s.parse("patience")?,
        max_epochs: s.parse("max_epochs")?,
        seed: s.parse("seed")?,
        mask_padding: s.flag("mask_padding")?,
    };
    cfg.validate().map_err(CliError::invalid)?;
    Ok(cfg)
}

/// Magnitude spectrogram of one audio file as a model input.
pub fn features(path: &Path) -> anyhow::Result<Tensor<f32>> {
    let w = load_waveform(path)?;
    Ok(stft_magnitude(&w)?.to_tensor())
}

/// Features for every path, in parallel; the first failure names its file.
pub fn features_all(paths: &[&Path]) -> CliResult<Vec<Tensor<f32>>> {
    paths
        .par_iter()
        .map(|p| features(p).map_err(|e| CliError::invalid(format!("{}: {e}", p.display()))))
        .collect()
}

pub fn report_line(name: &str, r: &EvalReport) -> String {
    let mut line = format!(
        "{name} {}: n={} LCC={:.3} SRCC={:.3} MSE={:.3}",
        r.level, r.n, r.lcc, r.srcc, r.mse
    );
    if let Some(acc) = r.accuracy {
        line.push_str(&format!(" accuracy={acc:.3}"));
    }
    line
}
