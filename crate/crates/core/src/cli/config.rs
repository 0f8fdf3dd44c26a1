//! Flat `key = value` configuration with per-command key tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Placeholder meaning "derive from the data".
pub const AUTO: &str = "auto";

#[derive(Debug, Clone)]
pub struct KeySpec {
    pub name: &'static str,
    /// `None` marks a required key.
    pub default: Option<String>,
    pub help: &'static str,
}

impl KeySpec {
    pub fn required(name: &'static str, help: &'static str) -> Self {
        Self { name, default: None, help }
    }

    pub fn with_default(name: &'static str, default: impl ToString, help: &'static str) -> Self {
        Self {
            name,
            default: Some(default.to_string()),
            help,
        }
    }

    pub fn flag(&self) -> String {
        self.name.replace('_', "-")
    }
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_flat(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("{origin}:{}: expected `key = value`, got `{raw}`", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("{origin}:{}: empty key", i + 1)));
        }
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(Error::Config(format!("{origin}:{}: duplicate key `{k}`", i + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Values for one command after layering defaults, the config file and flags.
#[derive(Debug, Clone)]
pub struct Resolved {
    command: &'static str,
    keys: Vec<KeySpec>,
    values: BTreeMap<&'static str, String>,
}

impl Resolved {
    /// Later layers win: defaults, then `file_entries`, then `flag_entries`.
    pub fn new(
        command: &'static str,
        keys: Vec<KeySpec>,
        file_entries: &[(String, String)],
        flag_entries: &[(&'static str, String)],
    ) -> Result<Self> {
        let mut values = BTreeMap::new();
        for k in &keys {
            if let Some(d) = &k.default {
                values.insert(k.name, d.clone());
            }
        }
        for (k, v) in file_entries {
            let spec = keys.iter().find(|s| s.name == k).ok_or_else(|| {
                let known: Vec<_> = keys.iter().map(|s| s.name).collect();
                Error::Config(format!("unknown key `{k}` for {command} (known: {})", known.join(", ")))
            })?;
            values.insert(spec.name, v.clone());
        }
        for (k, v) in flag_entries {
            values.insert(k, v.clone());
        }
        for k in &keys {
            if !values.contains_key(k.name) {
                return Err(Error::Config(format!(
                    "missing required --{} (or `{} = ...` in the config file)",
                    k.flag(),
                    k.name
                )));
            }
        }
        Ok(Self { command, keys, values })
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("key `{key}` is not declared for {}", self.command))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|e| Error::Config(format!("invalid value `{raw}` for {key}: {e}")))
    }

    /// `None` for the `auto` placeholder.
    pub fn get_auto<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if self.raw(key) == AUTO {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    /// Two comma-separated values.
    pub fn get_pair<T: FromStr>(&self, key: &str) -> Result<(T, T)>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key);
        let bad = |why: String| Error::Config(format!("invalid value `{raw}` for {key}: {why}"));
        let (a, b) = raw.split_once(',').ok_or_else(|| bad("expected `low,high`".into()))?;
        let parse = |s: &str| s.trim().parse::<T>().map_err(|e| bad(e.to_string()));
        Ok((parse(a)?, parse(b)?))
    }

    pub fn path(&self, key: &str) -> PathBuf {
        PathBuf::from(self.raw(key))
    }

    /// One `key = value` line per declared key, in declaration order.
    pub fn echo(&self) -> String {
        let mut s = format!("# resolved configuration of `glossfree {}`\n", self.command);
        for k in &self.keys {
            s.push_str(&format!("{} = {}\n", k.name, self.values[k.name]));
        }
        s
    }

    pub fn write_echo(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(format!("{}.resolved.cfg", self.command));
        std::fs::write(&path, self.echo()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys() -> Vec<KeySpec> {
        vec![
            KeySpec::required("dataset", "d"),
            KeySpec::with_default("seed", 0, "s"),
            KeySpec::with_default("range", "1,2", "r"),
        ]
    }

    #[test]
    fn layering_order() {
        let file = parse_flat("seed = 3 # comment\n\n# only a comment\ndataset=a\n", "f").unwrap();
        let r = Resolved::new("x", keys(), &file, &[("seed", "9".into())]).unwrap();
        assert_eq!(r.get::<u64>("seed").unwrap(), 9);
        assert_eq!(r.raw("dataset"), "a");
        assert_eq!(r.get_pair::<f64>("range").unwrap(), (1.0, 2.0));
        assert_eq!(r.echo(), "# resolved configuration of `glossfree x`\ndataset = a\nseed = 9\nrange = 1,2\n");
    }

    #[test]
    fn echo_reparses_to_same_values() {
        let r = Resolved::new("x", keys(), &[], &[("dataset", "p q".into())]).unwrap();
        let again = Resolved::new("x", keys(), &parse_flat(&r.echo(), "echo").unwrap(), &[]).unwrap();
        assert_eq!(again.echo(), r.echo());
    }

    #[test]
    fn unknown_and_missing_keys() {
        let file = parse_flat("bogus = 1\n", "f").unwrap();
        let err = Resolved::new("x", keys(), &file, &[]).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
        let err = Resolved::new("x", keys(), &[], &[]).unwrap_err().to_string();
        assert!(err.contains("--dataset"), "{err}");
        assert!(parse_flat("novalue\n", "f").is_err());
        assert!(parse_flat("a=1\na=2\n", "f").is_err());
    }

    #[test]
    fn bad_values_name_the_key() {
        let r = Resolved::new("x", keys(), &[], &[("dataset", "d".into()), ("seed", "x".into())]).unwrap();
        let err = r.get::<u64>("seed").unwrap_err().to_string();
        assert!(err.contains("seed"), "{err}");
    }
}
