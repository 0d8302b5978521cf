//! Config resolution: built-in defaults, then `--config` file, then
//! `--key value` overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use foothold_core::config::{ConfigError, KvConfig};
use foothold_core::terrain::TerrainError;

pub const RESOLVED_FILE: &str = "resolved.cfg";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(anyhow::Error),
    Gate(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
            CliError::Gate(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e:#}"),
            CliError::Gate(m) => write!(f, "property check failed: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<TerrainError> for CliError {
    fn from(e: TerrainError) -> Self {
        match e {
            TerrainError::InvalidSpec { .. } | TerrainError::Config(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

pub fn config_err(key: &str, reason: impl fmt::Display) -> CliError {
    CliError::Config(format!("invalid value for `{key}`: {reason}"))
}

/// Command-line overrides and the two path options that may appear among them.
#[derive(Debug, Default, PartialEq)]
pub struct Overrides {
    pub pairs: Vec<(String, String)>,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Splits `--key value`, `--key=value` and bare `--flag` tokens. Dashes in
/// keys become underscores; a flag with no value reads as `on`.
pub fn parse_overrides(tokens: &[String]) -> Result<Overrides, CliError> {
    let mut out = Overrides::default();
    let mut i = 0;
    while i < tokens.len() {
        let tok = &tokens[i];
        let Some(body) = tok.strip_prefix("--") else {
            return Err(CliError::Config(format!("unexpected argument `{tok}`")));
        };
        let (key, value) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => match tokens.get(i + 1) {
                Some(next) if !next.starts_with("--") => {
                    i += 1;
                    (body.to_string(), next.clone())
                }
                _ => (body.to_string(), "on".to_string()),
            },
        };
        let key = key.replace('-', "_");
        match key.as_str() {
            "config" => out.config = Some(PathBuf::from(value)),
            "out" => out.out = Some(PathBuf::from(value)),
            _ => out.pairs.push((key, value)),
        }
        i += 1;
    }
    Ok(out)
}

/// Merges defaults, an optional config file and overrides, rejecting keys
/// the command does not know.
pub fn resolve(
    defaults: &[(&str, &str)],
    file: Option<&Path>,
    pairs: &[(String, String)],
) -> Result<KvConfig, CliError> {
    let allowed: Vec<&str> = defaults.iter().map(|(k, _)| *k).collect();
    let mut cfg = KvConfig::new();
    for (k, v) in defaults {
        cfg.set(k, v)?;
    }
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let parsed = KvConfig::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        parsed.check_keys(&allowed)?;
        for (k, v) in parsed.iter() {
            cfg.set(k, v)?;
        }
    }
    for (k, v) in pairs {
        if !allowed.contains(&k.as_str()) {
            return Err(ConfigError::UnknownKey { key: k.clone() }.into());
        }
        cfg.set(k, v)?;
    }
    Ok(cfg)
}
