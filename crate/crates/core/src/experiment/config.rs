//! Flat `key = value` configuration.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::collision::UtildePolicy;
use crate::error::{Error, Result};

/// Keys accepted besides the free-form `experiment.*` namespace.
pub const KNOWN_KEYS: [&str; 13] = [
    "family",
    "alpha",
    "equilibrium",
    "relaxation.type",
    "relaxation.s_e",
    "relaxation.s_nu",
    "relaxation.s_p",
    "viscosity.mu",
    "viscosity.nu",
    "utilde.policy",
    "utilde.scale",
    "grid.n",
    "lambda",
];

fn check_key(key: &str) -> Result<()> {
    let free = key
        .strip_prefix("experiment.")
        .is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'));
    if free || KNOWN_KEYS.contains(&key) {
        Ok(())
    } else {
        Err(Error::Config(format!("unknown key `{key}`")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{line}`", no + 1)))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(cfg)
    }

    /// Parses a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected `key=value`, got `{pair}`")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        check_key(key)?;
        let value = value.into();
        if value.is_empty() {
            return Err(Error::Config(format!("empty value for `{key}`")));
        }
        self.entries.insert(key.to_string(), value);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
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

    /// Sorted `key = value` lines.
    pub fn canonical(&self) -> String {
        self.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Hex SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Reads typed values with defaults and records what was used.
#[derive(Debug)]
pub struct Resolver<'a> {
    src: &'a Config,
    used: Config,
}

impl<'a> Resolver<'a> {
    pub fn new(src: &'a Config) -> Self {
        Resolver {
            src,
            used: Config::new(),
        }
    }

    pub fn get<T>(&mut self, key: &str, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        match self.src.get(key) {
            Some(raw) => {
                let v = raw
                    .parse::<T>()
                    .map_err(|e| Error::Config(format!("bad value `{raw}` for `{key}`: {e}")))?;
                self.used.set(key, raw)?;
                Ok(v)
            }
            None => {
                self.used.set(key, default.to_string())?;
                Ok(default)
            }
        }
    }

    /// Like [`get`](Self::get) for keys without a default.
    pub fn get_opt<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some(raw) = self.src.get(key) else {
            return Ok(None);
        };
        let v = raw
            .parse::<T>()
            .map_err(|e| Error::Config(format!("bad value `{raw}` for `{key}`: {e}")))?;
        self.used.set(key, raw)?;
        Ok(Some(v))
    }

    /// Like [`get`](Self::get) for values whose text form is given directly.
    pub fn get_with<T>(&mut self, key: &str, default: &str, parse: impl Fn(&str) -> Result<T>) -> Result<T> {
        let raw = self.src.get(key).unwrap_or(default);
        let v = parse(raw).map_err(|e| Error::Config(format!("bad value `{raw}` for `{key}`: {e}")))?;
        self.used.set(key, raw)?;
        Ok(v)
    }

    /// `utilde.policy` combined with `utilde.scale`.
    pub fn utilde(&mut self, default: UtildePolicy) -> Result<UtildePolicy> {
        let policy: UtildePolicy = self.get("utilde.policy", default)?;
        let scale: f64 = self.get("utilde.scale", 1.0)?;
        Ok(match policy {
            UtildePolicy::Fluid if scale != 1.0 => UtildePolicy::ScaledFluid(scale),
            p => p,
        })
    }

    /// Keys present in the source that nothing read.
    pub fn unused(&self) -> Vec<String> {
        self.src
            .iter()
            .filter(|(k, _)| self.used.get(k).is_none())
            .map(|(k, _)| k.to_string())
            .collect()
    }

    pub fn finish(self) -> Config {
        for key in self.unused() {
            log::warn!("config key `{key}` is not used by this experiment");
        }
        self.used
    }
}

/// An explicit relaxation rate, which must lie in `(0, 2]`.
pub fn rate_override(r: &mut Resolver, key: &str) -> Result<Option<f64>> {
    let v: Option<f64> = r.get_opt(key)?;
    match v {
        Some(s) if !(s > 0.0 && s <= 2.0) => Err(Error::Config(format!("`{key}` must lie in (0, 2], got {s}"))),
        _ => Ok(v),
    }
}

/// `a..b` (inclusive) or a comma list of integers.
pub fn parse_index_list(s: &str) -> Result<Vec<u32>> {
    let bad = |e: &dyn Display| Error::Config(format!("bad integer list `{s}`: {e}"));
    let out: Vec<u32> = if let Some((a, b)) = s.split_once("..") {
        let a: u32 = a.trim().parse().map_err(|e| bad(&e))?;
        let b: u32 = b.trim().parse().map_err(|e| bad(&e))?;
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse::<u32>().map_err(|e| bad(&e)))
            .collect::<Result<_>>()?
    };
    if out.is_empty() {
        return Err(Error::Config(format!("empty range `{s}`")));
    }
    Ok(out)
}

/// Comma list of reals; entries may be fractions such as `1/64`.
pub fn parse_real_list(s: &str) -> Result<Vec<f64>> {
    let out = s.split(',').map(parse_real).collect::<Result<Vec<_>>>()?;
    if out.is_empty() {
        return Err(Error::Config(format!("empty list `{s}`")));
    }
    Ok(out)
}

pub fn parse_real(t: &str) -> Result<f64> {
    let t = t.trim();
    let bad = || Error::Config(format!("bad number `{t}`"));
    let v = match t.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            a / b
        }
        None => t.parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}
