//! Strict `key = value` config files with `[section]` headers. Unknown keys
//! are rejected with the offending line number, so a misspelled knob fails
//! fast instead of silently using a default.

use crate::{Error, Result};
use std::str::FromStr;

#[derive(Debug, Clone)]
struct Entry {
    section: String,
    key: String,
    value: String,
    line: usize,
}

/// Parsed config file. Entries before any `[section]` header live in the
/// empty-named section.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    entries: Vec<Entry>,
}

fn cfg_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config {
        line,
        msg: msg.into(),
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if let Some(name) = trimmed.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| cfg_err(line, "unterminated section header"))?
                    .trim();
                if name.is_empty() {
                    return Err(cfg_err(line, "empty section name"));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| cfg_err(line, "expected 'key = value'"))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(cfg_err(line, "empty key"));
            }
            if entries
                .iter()
                .any(|e: &Entry| e.section == section && e.key == key)
            {
                return Err(cfg_err(line, format!("duplicate key '{key}'")));
            }
            entries.push(Entry {
                section: section.clone(),
                key: key.to_string(),
                value: value.trim().to_string(),
                line,
            });
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries
            .iter()
            .find(|e| e.section == section && e.key == key)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.entry(section, key).map(|e| e.value.as_str())
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.get(section, key).ok_or_else(|| {
            cfg_err(0, format!("missing required key '{key}' in section [{section}]"))
        })
    }

    /// Typed lookup; parse failures carry the line number of the bad value.
    pub fn parse_value<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|_| {
                cfg_err(
                    e.line,
                    format!("cannot parse '{}' for key '{key}'", e.value),
                )
            }),
        }
    }

    pub fn parse_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        Ok(self.parse_value(section, key)?.unwrap_or(default))
    }

    /// Comma-separated typed list.
    pub fn parse_list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split(',')
                .map(|s| {
                    s.trim().parse::<T>().map_err(|_| {
                        cfg_err(e.line, format!("cannot parse list item '{}' for key '{key}'", s.trim()))
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    /// Reject any key outside the allowed set, reporting its line number.
    pub fn check_known(&self, section: &str, allowed: &[&str]) -> Result<()> {
        for e in self.entries.iter().filter(|e| e.section == section) {
            if !allowed.contains(&e.key.as_str()) {
                return Err(cfg_err(
                    e.line,
                    format!("unknown key '{}' in section [{}]", e.key, section),
                ));
            }
        }
        Ok(())
    }

    /// Reject any section outside the allowed set.
    pub fn check_sections(&self, allowed: &[&str]) -> Result<()> {
        for e in &self.entries {
            if !allowed.contains(&e.section.as_str()) {
                return Err(cfg_err(
                    e.line,
                    format!("unknown section [{}]", e.section),
                ));
            }
        }
        Ok(())
    }

    pub fn sections(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.section.as_str()) {
                out.push(&e.section);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# benchmark run
seed = 42

[data]
problem = advection
n = 640
points = 200

[sweep]
sizes = 2, 4, 8
";

    #[test]
    fn parses_sections_and_values() {
        let cfg = ConfigFile::parse(SAMPLE).unwrap();
        assert_eq!(cfg.get("", "seed"), Some("42"));
        assert_eq!(cfg.get("data", "problem"), Some("advection"));
        assert_eq!(cfg.parse_or::<usize>("data", "n", 0).unwrap(), 640);
        assert_eq!(
            cfg.parse_list::<usize>("sweep", "sizes").unwrap().unwrap(),
            vec![2, 4, 8]
        );
        assert_eq!(cfg.sections(), vec!["", "data", "sweep"]);
        assert!(cfg.get("data", "missing").is_none());
        assert_eq!(cfg.parse_or::<u64>("", "other", 7).unwrap(), 7);
    }

    #[test]
    fn rejects_malformed_lines_with_line_numbers() {
        let err = ConfigFile::parse("a = 1\nbogus line\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }), "{err}");
        let err = ConfigFile::parse("[unclosed\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }));
        let err = ConfigFile::parse("a = 1\na = 2\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
        let err = ConfigFile::parse("= 3\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }));
    }

    #[test]
    fn strictness_reports_unknown_keys() {
        let cfg = ConfigFile::parse(SAMPLE).unwrap();
        cfg.check_known("data", &["problem", "n", "points"]).unwrap();
        let err = cfg.check_known("data", &["problem", "n"]).unwrap_err();
        assert!(matches!(err, Error::Config { line: 7, .. }), "{err}");
        cfg.check_sections(&["", "data", "sweep"]).unwrap();
        let err = cfg.check_sections(&["", "data"]).unwrap_err();
        assert!(matches!(err, Error::Config { line: 10, .. }));
    }

    #[test]
    fn bad_typed_values_point_at_their_line() {
        let cfg = ConfigFile::parse("[data]\nn = many\n").unwrap();
        let err = cfg.parse_value::<usize>("data", "n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
        let err = cfg.parse_list::<f64>("data", "n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
    }
}
