//! Flat `key = value` experiment configuration.
//!
//! Keys in the unnamed top section apply to every command; keys under a
//! `[command]` section apply to that command only and win over the top
//! section. Other sections are ignored, so one file can drive all commands.
//! Flags override both. A key from a command section or a flag that the
//! command does not read is rejected, as is a top-section key no command
//! knows, so typos fail before any sampling starts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use ini::Ini;

/// Every key read by some command.
pub const KNOWN_KEYS: &[&str] = &[
    "activation", "alpha", "alphas", "assert_joint_trend", "assert_kurtosis", "assert_slope", "cf_layers",
    "coalesce_bins", "compare_layer", "consistency_points", "cw_copies", "cw_layer", "cw_realizations",
    "cw_weights", "cw_width", "depth", "envelope", "grid", "grid_resolution", "hidden", "input_file", "inputs",
    "joint_layers", "joint_n_grid", "kurtosis_factor", "layers", "n", "n_grid", "out", "particles", "per_pool",
    "pools", "realizations", "regime", "repeats", "seed", "seq_layers", "seq_n_grid", "seq_particles",
    "sigma_b", "sigma_w", "slope_target", "slope_tolerance", "tail_eps", "tail_samples", "trend_n", "units",
];

#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    /// Keys given only in the shared top section.
    shared: BTreeSet<String>,
    consumed: BTreeSet<String>,
    resolved: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: &Path, command: &str, overrides: &[(String, String)]) -> Result<Self> {
        let ini = Ini::load_from_file(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut values = BTreeMap::new();
        let mut shared = BTreeSet::new();
        for (k, v) in ini.general_section().iter() {
            let k = k.trim();
            if !KNOWN_KEYS.contains(&k) {
                bail!("unknown config key `{k}`");
            }
            values.insert(k.to_string(), v.trim().to_string());
            shared.insert(k.to_string());
        }
        if let Some(section) = ini.section(Some(command)) {
            for (k, v) in section.iter() {
                values.insert(k.trim().to_string(), v.trim().to_string());
                shared.remove(k.trim());
            }
        }
        for (k, v) in overrides {
            values.insert(k.clone(), v.clone());
            shared.remove(k);
        }
        Ok(Settings { values, shared, ..Default::default() })
    }

    #[cfg(test)]
    pub fn from_pairs(pairs: &[(&str, &str)]) -> Self {
        let values = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        Settings { values, ..Default::default() }
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.consumed.insert(key.to_string());
        self.values.get(key).cloned()
    }

    pub fn get<T: FromStr + Display>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        let value = match self.take(key) {
            Some(raw) => raw.parse::<T>().map_err(|e| anyhow!("config key `{key}`: cannot parse `{raw}`: {e}"))?,
            None => default,
        };
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    pub fn string(&mut self, key: &str, default: &str) -> String {
        let value = self.take(key).unwrap_or_else(|| default.to_string());
        self.resolved.insert(key.to_string(), value.clone());
        value
    }

    pub fn list<T: FromStr + Display + Clone>(&mut self, key: &str, default: &[T]) -> Result<Vec<T>>
    where
        T::Err: Display,
    {
        let value = match self.take(key) {
            Some(raw) => raw
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<T>().map_err(|e| anyhow!("config key `{key}`: cannot parse `{s}`: {e}")))
                .collect::<Result<Vec<T>>>()?,
            None => default.to_vec(),
        };
        if value.is_empty() {
            bail!("config key `{key}` must not be empty");
        }
        self.resolved.insert(key.to_string(), join(&value));
        Ok(value)
    }

    /// Records a derived value in the resolved configuration.
    pub fn note(&mut self, key: &str, value: impl Display) {
        self.resolved.insert(key.to_string(), value.to_string());
    }

    /// Fails on keys that were supplied but never read.
    pub fn finish(&self, command: &str) -> Result<()> {
        let unknown: Vec<&str> = self
            .values
            .keys()
            .filter(|k| !self.consumed.contains(*k) && !self.shared.contains(*k))
            .map(String::as_str)
            .collect();
        if !unknown.is_empty() {
            bail!("unknown config keys for `{command}`: {}", unknown.join(", "));
        }
        Ok(())
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }
}

pub fn join<T: Display>(values: &[T]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}
