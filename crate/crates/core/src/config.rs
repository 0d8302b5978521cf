//! Flat `key = value` configuration text.
//!
//! One pair per line, `#` starts a comment, blank lines are ignored. Keys are
//! lowercase identifiers (`[a-z0-9_]`); values are trimmed and may not be empty.
//! Duplicate keys are rejected so that a config always has a single reading.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    MissingEquals { line: usize },
    #[error("line {line}: invalid key `{key}`")]
    BadKey { line: usize, key: String },
    #[error("line {line}: empty value for `{key}`")]
    EmptyValue { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("unknown key `{key}`")]
    UnknownKey { key: String },
    #[error("missing required key `{key}`")]
    MissingKey { key: String },
    #[error("invalid value for `{key}`: `{value}` ({reason})")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
}

impl ConfigError {
    /// The configuration key the error refers to, when there is one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::MissingEquals { .. } => None,
            ConfigError::BadKey { key, .. }
            | ConfigError::EmptyValue { key, .. }
            | ConfigError::Duplicate { key, .. }
            | ConfigError::UnknownKey { key }
            | ConfigError::MissingKey { key }
            | ConfigError::InvalidValue { key, .. } => Some(key),
        }
    }
}

/// Parsed key-value pairs in sorted key order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

pub fn is_valid_key(key: &str) -> bool {
    !key.is_empty()
        && key
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

impl KvConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::MissingEquals { line: line_no })?;
            let key = key.trim();
            let value = value.trim();
            if !is_valid_key(key) {
                return Err(ConfigError::BadKey {
                    line: line_no,
                    key: key.to_string(),
                });
            }
            if value.is_empty() {
                return Err(ConfigError::EmptyValue {
                    line: line_no,
                    key: key.to_string(),
                });
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(ConfigError::Duplicate {
                    line: line_no,
                    key: key.to_string(),
                });
            }
        }
        Ok(Self { entries })
    }

    /// Sets or replaces a value (command-line overrides go through here).
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !is_valid_key(key) {
            return Err(ConfigError::BadKey {
                line: 0,
                key: key.to_string(),
            });
        }
        let value = value.trim();
        if value.is_empty() || value.contains('\n') || value.contains('#') {
            return Err(ConfigError::InvalidValue {
                key: key.to_string(),
                value: value.to_string(),
                reason: "values must be non-empty single-line text without `#`".into(),
            });
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rejects any key not in `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        match self.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(ConfigError::UnknownKey { key: k.clone() }),
            None => Ok(()),
        }
    }

    pub fn parse_value<T>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| ConfigError::InvalidValue {
                    key: key.to_string(),
                    value: v.to_string(),
                    reason: e.to_string(),
                }),
        }
    }

    pub fn parse_or<T>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        Ok(self.parse_value(key)?.unwrap_or(default))
    }

    pub fn require<T>(&self, key: &str) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.parse_value(key)?.ok_or_else(|| ConfigError::MissingKey {
            key: key.to_string(),
        })
    }

    /// Comma-separated list value.
    pub fn parse_list<T>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|item| {
                item.trim()
                    .parse::<T>()
                    .map_err(|e| ConfigError::InvalidValue {
                        key: key.to_string(),
                        value: v.to_string(),
                        reason: e.to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    pub fn parse_bool(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some("true" | "on" | "yes" | "1") => Ok(true),
            Some("false" | "off" | "no" | "0") => Ok(false),
            Some(v) => Err(ConfigError::InvalidValue {
                key: key.to_string(),
                value: v.to_string(),
                reason: "expected on/off or true/false".into(),
            }),
        }
    }

    /// Canonical text form: sorted keys, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}
