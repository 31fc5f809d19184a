//! Sectioned `key = value` run files merged with command-line flags.
//!
//! ```text
//! # comment
//! [physics]
//! gamma = 3
//! entropy = radial-quadratic:0.1
//! [grid]
//! nr = 129
//! ```
//!
//! Section headers only group keys; every key is a flag name of the command
//! (`max-iters` and `max_iters` are the same key). Flags win over the file.

use crate::error::CliError;
use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone)]
enum Origin {
    Flag,
    File { path: String, line: usize },
    Default,
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    origin: Origin,
}

/// Raw entries of a run file, keyed by normalised name.
#[derive(Debug, Default)]
pub struct RunFile {
    path: String,
    entries: BTreeMap<String, (String, usize)>,
}

fn normalise(key: &str) -> String {
    key.trim().replace('_', "-").to_ascii_lowercase()
}

impl RunFile {
    pub fn parse(path: &str, text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') || t.starts_with(';') {
                continue;
            }
            if let Some(rest) = t.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| {
                    CliError::Config(format!("{path}:{line}: unterminated section header '{t}'"))
                })?;
                if name.trim().is_empty() {
                    return Err(CliError::Config(format!("{path}:{line}: empty section name")));
                }
                continue;
            }
            let (key, value) = t
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{path}:{line}: expected 'key = value', got '{t}'")))?;
            let key = normalise(key);
            if key.is_empty() {
                return Err(CliError::Config(format!("{path}:{line}: missing key")));
            }
            let value = value.trim().trim_matches('"').to_string();
            if let Some((_, first)) = entries.get(&key) {
                return Err(CliError::Config(format!(
                    "{path}:{line}: duplicate key '{key}' (first set on line {first})"
                )));
            }
            entries.insert(key, (value, line));
        }
        Ok(Self {
            path: path.to_string(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&path.display().to_string(), &text)
    }
}

/// Resolved parameters for one command. Every value read through the typed
/// getters (defaults included) is recorded for the report.
#[derive(Debug)]
pub struct Params {
    entries: BTreeMap<String, Entry>,
    resolved: RefCell<BTreeMap<String, String>>,
}

impl Params {
    /// `allowed` lists the keys the command understands; `command` may also
    /// appear in the file and must then name the running command.
    pub fn new(
        command: &str,
        allowed: &[&str],
        file: Option<RunFile>,
        flags: Vec<(&str, Option<String>)>,
    ) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        if let Some(file) = file {
            for (key, (value, line)) in file.entries {
                if key == "command" {
                    if value != command {
                        return Err(CliError::Config(format!(
                            "{}:{line}: config is for command '{value}', not '{command}'",
                            file.path
                        )));
                    }
                    continue;
                }
                if !allowed.contains(&key.as_str()) {
                    return Err(CliError::Config(format!(
                        "{}:{line}: unknown key '{key}' for {command} (expected one of: {})",
                        file.path,
                        allowed.join(", ")
                    )));
                }
                let origin = Origin::File {
                    path: file.path.clone(),
                    line,
                };
                entries.insert(key, Entry { value, origin });
            }
        }
        for (key, value) in flags {
            if let Some(value) = value {
                entries.insert(
                    key.to_string(),
                    Entry {
                        value,
                        origin: Origin::Flag,
                    },
                );
            }
        }
        Ok(Self {
            entries,
            resolved: RefCell::new(BTreeMap::new()),
        })
    }

    fn lookup(&self, key: &str, default: Option<&str>) -> Option<Entry> {
        let e = self.entries.get(key).cloned().or_else(|| {
            default.map(|d| Entry {
                value: d.to_string(),
                origin: Origin::Default,
            })
        })?;
        self.resolved.borrow_mut().insert(key.to_string(), e.value.clone());
        Some(e)
    }

    fn fail(key: &str, e: &Entry, msg: &str) -> CliError {
        match &e.origin {
            Origin::File { path, line } => {
                CliError::Config(format!("{path}:{line}: invalid value '{}' for '{key}': {msg}", e.value))
            }
            Origin::Flag => CliError::Config(format!("--{key} {}: {msg}", e.value)),
            Origin::Default => CliError::Config(format!("default for '{key}' is invalid: {msg}")),
        }
    }

    /// Parse `key` with `f`, falling back to `default`.
    pub fn parse<T>(&self, key: &str, default: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<T, CliError> {
        let e = self.lookup(key, Some(default)).expect("default supplied");
        f(&e.value).map_err(|m| Self::fail(key, &e, &m))
    }

    /// Like [`Self::parse`] but the key must be given.
    pub fn require<T>(&self, key: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<T, CliError> {
        let e = self
            .lookup(key, None)
            .ok_or_else(|| CliError::Config(format!("missing required setting '{key}' (flag --{key})")))?;
        f(&e.value).map_err(|m| Self::fail(key, &e, &m))
    }

    pub fn f64(&self, key: &str, default: &str) -> Result<f64, CliError> {
        self.parse(key, default, parse_f64)
    }

    pub fn usize(&self, key: &str, default: &str) -> Result<usize, CliError> {
        self.parse(key, default, |s| s.parse::<usize>().map_err(|e| e.to_string()))
    }

    pub fn u64(&self, key: &str, default: &str) -> Result<u64, CliError> {
        self.parse(key, default, |s| s.parse::<u64>().map_err(|e| e.to_string()))
    }

    pub fn string(&self, key: &str, default: &str) -> Result<String, CliError> {
        self.parse(key, default, |s| Ok(s.to_string()))
    }

    /// `auto` (or the default) maps to `None`.
    pub fn auto_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.parse(key, "auto", |s| {
            if s.eq_ignore_ascii_case("auto") {
                Ok(None)
            } else {
                parse_f64(s).map(Some)
            }
        })
    }

    /// Everything read so far, for reports.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.resolved.borrow().clone()
    }
}

pub fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err("value must be finite".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALLOWED: &[&str] = &["gamma", "nr", "max-iters", "seed"];

    #[test]
    fn flags_override_file() {
        let f = RunFile::parse("run.cfg", "[physics]\ngamma = 3\n[grid]\nnr = 65\n").unwrap();
        let p = Params::new("x", ALLOWED, Some(f), vec![("nr", Some("33".into()))]).unwrap();
        assert_eq!(p.f64("gamma", "2.5").unwrap(), 3.0);
        assert_eq!(p.usize("nr", "129").unwrap(), 33);
        assert_eq!(p.usize("max-iters", "10").unwrap(), 10);
        let r = p.resolved();
        assert_eq!(r["nr"], "33");
        assert_eq!(r["max-iters"], "10");
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let err = RunFile::parse("run.cfg", "# c\n[a]\ngamma 3\n").unwrap_err();
        assert!(err.to_string().contains("run.cfg:3"), "{err}");

        let f = RunFile::parse("run.cfg", "\n\nmax_iters = many\n").unwrap();
        let p = Params::new("x", ALLOWED, Some(f), vec![]).unwrap();
        let err = p.usize("max-iters", "1").unwrap_err();
        assert!(err.to_string().contains("run.cfg:3"), "{err}");

        let f = RunFile::parse("run.cfg", "gamma = 3\nbogus = 1\n").unwrap();
        let err = Params::new("x", ALLOWED, Some(f), vec![]).unwrap_err();
        assert!(err.to_string().contains("run.cfg:2"), "{err}");

        let err = RunFile::parse("run.cfg", "nr = 1\nnr = 2\n").unwrap_err();
        assert!(err.to_string().contains("run.cfg:2"), "{err}");
    }

    #[test]
    fn command_key_must_match() {
        let f = RunFile::parse("run.cfg", "command = verify\n").unwrap();
        assert!(Params::new("lane-emden", ALLOWED, Some(f), vec![]).is_err());
    }
}
