//! Flat `key = value` config files and flag/file/default resolution.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

/// Keys accepted in a config file; each is the long name of a flag.
pub const KNOWN_KEYS: &[&str] = &[
    "n-items",
    "n-samples",
    "partitions",
    "cap",
    "loss",
    "intervals",
    "shift-c",
    "lr",
    "optimizer",
    "batch-size",
    "epochs",
    "patience",
    "seed",
    "valid-fraction",
    "hidden",
    "steps",
    "pool",
    "instances",
    "probe-instances",
    "k",
    "propensity-a",
    "propensity-b",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Blank lines and lines starting with `#` are skipped. Keys may use
    /// dashes or underscores.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", no + 1)))?;
            let key = key.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Config(format!("line {}: unknown key `{key}`", no + 1)));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key `{key}`", no + 1)));
            }
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

fn parse_value<T>(key: &str, raw: &str) -> CliResult<T>
where
    T: FromStr,
    T::Err: Display,
{
    raw.parse()
        .map_err(|e| CliError::Config(format!("bad value `{raw}` for `{key}`: {e}")))
}

/// Resolves settings with precedence flag, then config file, then default.
#[derive(Clone, Copy, Debug, Default)]
pub struct Resolver<'a> {
    pub file: Option<&'a ConfigFile>,
}

impl<'a> Resolver<'a> {
    pub fn new(file: Option<&'a ConfigFile>) -> Self {
        Self { file }
    }

    pub fn opt<T>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.and_then(|f| f.get(key)) {
            Some(raw) => parse_value(key, raw).map(Some),
            None => Ok(None),
        }
    }

    pub fn get<T>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    /// Comma-separated list; an empty flag list counts as unset.
    pub fn list<T>(&self, flag: Vec<T>, key: &str, default: Vec<T>) -> CliResult<Vec<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if !flag.is_empty() {
            return Ok(flag);
        }
        match self.file.and_then(|f| f.get(key)) {
            Some(raw) => raw
                .split(',')
                .map(|s| parse_value(key, s.trim()))
                .collect(),
            None => Ok(default),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_is_flag_then_file_then_default() {
        let file = ConfigFile::parse("# comment\nlr = 0.5\nbatch_size=7\nseed = 1,2\n").unwrap();
        let r = Resolver::new(Some(&file));
        assert_eq!(r.get(Some(0.1), "lr", 1.0).unwrap(), 0.1);
        assert_eq!(r.get(None, "lr", 1.0).unwrap(), 0.5);
        assert_eq!(r.get::<usize>(None, "batch-size", 3).unwrap(), 7);
        assert_eq!(r.get::<usize>(None, "epochs", 3).unwrap(), 3);
        assert_eq!(r.list::<u64>(vec![], "seed", vec![0]).unwrap(), vec![1, 2]);
        assert_eq!(r.list(vec![9u64], "seed", vec![0]).unwrap(), vec![9]);
    }

    #[test]
    fn bad_files_are_config_errors() {
        for text in ["lr 0.5", "colour = red", "lr = 1\nlr = 2"] {
            assert!(matches!(ConfigFile::parse(text), Err(CliError::Config(_))), "{text}");
        }
        let file = ConfigFile::parse("lr = fast").unwrap();
        assert!(Resolver::new(Some(&file)).get(None, "lr", 1.0f64).is_err());
    }
}
