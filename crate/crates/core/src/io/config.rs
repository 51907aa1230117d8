use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use super::{read_text, DataError, Result};

/// `key = value` pairs from a line-oriented configuration file. Blank lines
/// and lines starting with `#` are ignored; keys may appear once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, (u64, String)>,
}

impl KeyValues {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    /// Parsed value of `key`, or `None` when absent.
    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, raw)) => raw.parse().map(Some).map_err(|e: T::Err| DataError::Invalid {
                line: *line,
                message: format!("`{key}`: {e}"),
            }),
        }
    }

    /// Comma-separated list value of `key`.
    pub fn parse_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, raw)) => raw
                .split(',')
                .map(|item| {
                    item.trim().parse().map_err(|e: T::Err| DataError::Invalid {
                        line: *line,
                        message: format!("`{key}`: {e}"),
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Line on which `key` was set.
    pub fn line_of(&self, key: &str) -> Option<u64> {
        self.entries.get(key).map(|(line, _)| *line)
    }
}

pub fn parse_key_values(text: &str) -> Result<KeyValues> {
    let mut entries = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| DataError::Invalid {
            line,
            message: "expected `key = value`".into(),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(DataError::Invalid {
                line,
                message: "empty key".into(),
            });
        }
        if entries
            .insert(key.to_string(), (line, value.trim().to_string()))
            .is_some()
        {
            return Err(DataError::Duplicate {
                line,
                what: format!("key `{key}`"),
            });
        }
    }
    Ok(KeyValues { entries })
}

pub fn read_key_values(path: &Path) -> Result<KeyValues> {
    parse_key_values(&read_text(path)?)
}
