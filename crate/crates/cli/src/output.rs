//! Output directories and the files written into them.

use std::path::{Path, PathBuf};

use anyhow::Context;

use crate::error::{CliError, CliResult, OrFailed};
use crate::settings::Settings;

/// Environment variable naming the default root for command outputs.
pub const OUTPUT_ROOT_ENV: &str = "MOSNET_OUTPUT_ROOT";

/// Name of the effective-settings file; its presence marks a directory as
/// one this tool wrote.
pub const CONFIG_ECHO: &str = "config.txt";

/// `out` if set, otherwise `$MOSNET_OUTPUT_ROOT/<command>` or
/// `runs/<command>`.
pub fn output_dir(settings: &mut Settings, command: &str) -> PathBuf {
    if let Some(out) = settings.get("out") {
        return PathBuf::from(out);
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
    let dir = root.join(command);
    settings.set("out", dir.display().to_string());
    dir
}

/// Creates `dir`. A non-empty directory is refused unless `overwrite` is
/// set, and even then only when it holds a previous run's config echo.
pub fn prepare_output_dir(dir: &Path, overwrite: bool) -> CliResult<()> {
    let non_empty = dir.is_dir() && std::fs::read_dir(dir).map(|mut it| it.next().is_some()).unwrap_or(true);
    if non_empty {
        if !overwrite {
            return Err(CliError::invalid(format!(
                "output directory {} is not empty; pass --overwrite to replace it",
                dir.display()
            )));
        }
        if !dir.join(CONFIG_ECHO).is_file() {
            return Err(CliError::invalid(format!(
                "refusing to overwrite {}: it does not look like a previous run (no {CONFIG_ECHO})",
                dir.display()
            )));
        }
        std::fs::remove_dir_all(dir).or_failed(&format!("clearing {}", dir.display()))?;
    } else if dir.exists() && !dir.is_dir() {
        return Err(CliError::invalid(format!(
            "{} exists and is not a directory",
            dir.display()
        )));
    }
    std::fs::create_dir_all(dir).or_failed(&format!("creating {}", dir.display()))
}

/// Prepares the output directory and echoes the effective settings into it.
pub fn start_run(settings: &mut Settings, command: &str, overwrite: bool) -> CliResult<PathBuf> {
    let dir = output_dir(settings, command);
    prepare_output_dir(&dir, overwrite)?;
    write(
        &dir.join(CONFIG_ECHO),
        &format!("command={command}\n{}", settings.to_text()),
    )?;
    Ok(dir)
}

pub fn write(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(CliError::Failed)
}

/// CSV text with `header` and one record per row, quoted where needed.
pub fn csv_text<R, I, S>(header: &[&str], rows: R) -> String
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}
