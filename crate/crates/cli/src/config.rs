//! Plain `key = value` run configuration. Blank lines and `#` comments are
//! ignored; unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, Context, Result};

use abdisk::spectra::MeshLevel;

pub const KEYS: &[&str] = &[
    "t",
    "t_grid",
    "k",
    "variant",
    "merged",
    "levels",
    "base_level",
    "grade_rounds",
    "tol",
    "seed",
    "format",
    "output",
    "suite",
    "coarse",
    "twice_order",
    "count",
];

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected `key = value`", n + 1))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(anyhow!("config line {}: unknown key `{key}`", n + 1));
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| anyhow!("config key `{key}`: {e}"))
            })
            .transpose()
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Parses `4:4,5:6,6:8` into mesh levels.
pub fn parse_levels(s: &str) -> Result<Vec<MeshLevel>> {
    s.split(',')
        .map(|item| {
            let (b, g) = item
                .trim()
                .split_once(':')
                .ok_or_else(|| anyhow!("mesh level `{item}` is not base:grade"))?;
            Ok((b.trim().parse()?, g.trim().parse()?))
        })
        .collect()
}

/// Parses either a comma list `0,0.1,0.2` or a range `start:stop:step`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    if let [a, b, h] = s.split(':').collect::<Vec<_>>()[..] {
        let (a, b, h): (f64, f64, f64) = (a.trim().parse()?, b.trim().parse()?, h.trim().parse()?);
        if !(h > 0.0) || b < a {
            return Err(anyhow!(
                "grid range `{s}` must have step > 0 and stop ≥ start"
            ));
        }
        let n = ((b - a) / h + 1e-9).floor() as usize;
        // integer multiples keep grid points free of accumulated drift
        return Ok((0..=n).map(|i| a + i as f64 * h).map(round_grid).collect());
    }
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(Into::into))
        .collect()
}

fn round_grid(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}
