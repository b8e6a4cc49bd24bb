//! Command settings: `key=value` files with `#` comments, overridden by
//! command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy)]
pub enum Default {
    Required,
    /// Absent unless given; the command picks its own fallback.
    Optional,
    Value(&'static str),
}

#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub default: Default,
}

pub const fn required(name: &'static str) -> Key {
    Key {
        name,
        default: Default::Required,
    }
}

pub const fn optional(name: &'static str) -> Key {
    Key {
        name,
        default: Default::Optional,
    }
}

pub const fn value(name: &'static str, v: &'static str) -> Key {
    Key {
        name,
        default: Default::Value(v),
    }
}

/// Keys every command accepts.
pub const COMMON: [Key; 2] = [optional("out"), value("seed", "0")];

/// Parses `key=value` lines. Blank lines and everything after `#` are
/// ignored; keys may not repeat.
pub fn parse_config_text(text: &str, source: &str) -> CliResult<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::invalid(format!("{source}:{}: expected key=value, got '{line}'", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(CliError::invalid(format!("{source}:{}: empty key", i + 1)));
        }
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(CliError::invalid(format!("{source}:{}: key '{k}' set twice", i + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Parses one `--set key=value` argument.
pub fn parse_assignment(s: &str) -> CliResult<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::invalid(format!("--set expects key=value, got '{s}'")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    values: BTreeMap<&'static str, String>,
}

impl Settings {
    /// Merges, lowest precedence first: schema defaults, the config file,
    /// `--set` assignments, dedicated flags. Unknown keys and missing
    /// required keys are validation errors.
    pub fn resolve(
        schema: &[Key],
        config_file: Option<&Path>,
        assignments: &[String],
        flags: Vec<(&'static str, Option<String>)>,
    ) -> CliResult<Self> {
        let mut layers: Vec<(String, String)> = Vec::new();
        if let Some(path) = config_file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::invalid(format!("cannot read config file {}: {e}", path.display())))?;
            layers.extend(parse_config_text(&text, &path.display().to_string())?);
        }
        for a in assignments {
            layers.push(parse_assignment(a)?);
        }
        layers.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));

        let all: Vec<Key> = COMMON.iter().chain(schema).copied().collect();
        let mut values = BTreeMap::new();
        for key in &all {
            if let Default::Value(v) = key.default {
                values.insert(key.name, v.to_string());
            }
        }
        for (k, v) in layers {
            let key = all.iter().find(|key| key.name == k).ok_or_else(|| {
                let known: Vec<&str> = all.iter().map(|k| k.name).collect();
                CliError::invalid(format!("unknown setting '{k}' (known: {})", known.join(", ")))
            })?;
            values.insert(key.name, v);
        }
        let missing: Vec<&str> = all
            .iter()
            .filter(|k| matches!(k.default, Default::Required) && !values.contains_key(k.name))
            .map(|k| k.name)
            .collect();
        if !missing.is_empty() {
            return Err(CliError::invalid(format!(
                "missing required setting(s): {}",
                missing.join(", ")
            )));
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &'static str, value: String) {
        self.values.insert(key, value);
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parse_opt(key)?
            .ok_or_else(|| CliError::invalid(format!("setting '{key}' is required")))
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::invalid(format!("setting {key}='{v}': {e}")))
            })
            .transpose()
    }

    pub fn flag(&self, key: &str) -> CliResult<bool> {
        match self.get(key) {
            Some("true" | "1" | "yes" | "on") => Ok(true),
            Some("false" | "0" | "no" | "off") | None => Ok(false),
            Some(v) => Err(CliError::invalid(format!("setting {key}='{v}' is not a boolean"))),
        }
    }

    pub fn path(&self, key: &str) -> CliResult<PathBuf> {
        self.parse(key)
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> CliResult<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|part| {
                        part.trim()
                            .parse::<T>()
                            .map_err(|e| CliError::invalid(format!("setting {key}='{v}': {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    /// The effective settings as `key=value` lines, sorted by key.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: [Key; 3] = [required("ratings"), value("alpha", "1"), optional("channels")];

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let kv = parse_config_text("# header\n\nalpha = 0.5  # trailing\nratings=r.csv\n", "cfg").unwrap();
        assert_eq!(
            kv,
            vec![("alpha".into(), "0.5".into()), ("ratings".into(), "r.csv".into())]
        );
    }

    #[test]
    fn later_layers_win() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "ratings=a.csv\nalpha=0.5\n").unwrap();
        let s = Settings::resolve(
            &SCHEMA,
            Some(&cfg),
            &["alpha=0.25".into()],
            vec![("ratings", Some("b.csv".into())), ("alpha", None)],
        )
        .unwrap();
        assert_eq!(s.get("ratings"), Some("b.csv"));
        assert_eq!(s.parse::<f64>("alpha").unwrap(), 0.25);
        assert_eq!(s.get("seed"), Some("0"));
        assert_eq!(s.get("channels"), None);
        assert_eq!(s.to_text(), "alpha=0.25\nratings=b.csv\nseed=0\n");
    }

    #[test]
    fn unknown_and_missing_keys_are_validation_errors() {
        let e = Settings::resolve(&SCHEMA, None, &["ratings=x".into(), "alhpa=1".into()], vec![]).unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(e.to_string().contains("alhpa"));
        let e = Settings::resolve(&SCHEMA, None, &[], vec![]).unwrap_err();
        assert!(e.to_string().contains("ratings"));
    }

    #[test]
    fn malformed_values_name_the_key() {
        let s = Settings::resolve(&SCHEMA, None, &["ratings=x".into(), "alpha=lots".into()], vec![]).unwrap();
        let e = s.parse::<f64>("alpha").unwrap_err();
        assert!(e.to_string().contains("alpha='lots'"));
        assert!(parse_config_text("no equals sign", "f").is_err());
        assert!(parse_config_text("a=1\na=2", "f").is_err());
    }

    #[test]
    fn lists_and_flags() {
        let s = Settings::resolve(&SCHEMA, None, &["ratings=1".into(), "channels=4, 8,16".into()], vec![]).unwrap();
        assert_eq!(s.list::<usize>("channels").unwrap(), Some(vec![4, 8, 16]));
        assert!(!s.flag("missing").unwrap());
    }
}
