//! Run settings from an optional `key = value` file, overridden by flags.
//!
//! ```text
//! # sweep.conf
//! family = weibull
//! levels = 3
//! methods = KLD, GDFloyd
//! k = 8, 16
//! ```

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use statgeo::graph::EdgeWeight;
use statgeo::retrieval::{Aggregation, Layout, Method};
use statgeo::synth::SynthConfig;
use statgeo::Family;

use crate::exit::CliError;

pub const KEYS: &[&str] = &[
    "family",
    "levels",
    "methods",
    "edge_weight",
    "aggregation",
    "include_query",
    "k",
    "seed",
    "workers",
    "dataset",
    "manifest",
    "db",
    "out",
    "skip_bad",
    "classes",
    "per_class",
    "size",
    "separation",
    "jitter",
];

/// Raw key/value layer. Keys are normalized to snake case.
#[derive(Debug, Clone, Default)]
pub struct Layer {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

impl Layer {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::config(format!("{origin}:{}: expected key = value", n + 1)));
            };
            let key = normalize(key);
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::config(format!("{origin}:{}: unknown key '{key}'", n + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("config file {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        debug_assert!(KEYS.contains(&key), "{key}");
        self.values.insert(key.to_string(), value.to_string());
    }

    /// Set `key` when the flag was given.
    pub fn set_opt<T: ToString>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    /// Set `key` to a comma-joined list when it is not empty.
    pub fn set_list<T: ToString>(&mut self, key: &str, values: &[T]) {
        if !values.is_empty() {
            self.set(key, values.iter().map(T::to_string).collect::<Vec<_>>().join(","));
        }
    }

    /// Entries of `over` replace ours.
    pub fn overlay(mut self, over: Layer) -> Self {
        self.values.extend(over.values);
        self
    }

    fn get<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.values.get(key).map(|v| v.parse().map_err(|e| CliError::config(format!("{key} = {v}: {e}")))).transpose()
    }

    fn get_list<T>(&self, key: &str) -> Result<Vec<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some(v) = self.values.get(key) else {
            return Ok(Vec::new());
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| CliError::config(format!("{key} = {v}: {e}"))))
            .collect()
    }
}

/// Fully resolved settings. Fields left `None` were given by neither layer;
/// each command applies its own default or requirement.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub family: Option<Family>,
    pub levels: Option<usize>,
    pub methods: Vec<Method>,
    pub edge_weight: Option<EdgeWeight>,
    pub aggregation: Option<Aggregation>,
    pub include_query: bool,
    pub ks: Vec<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub dataset: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub db: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    pub skip_bad: bool,
    pub synth: SynthConfig,
}

pub const DEFAULT_FAMILY: Family = Family::Gamma;
pub const DEFAULT_LEVELS: usize = 3;

impl RunConfig {
    pub fn resolve(layer: &Layer) -> Result<Self, CliError> {
        let defaults = SynthConfig::default();
        let cfg = Self {
            family: layer.get("family")?,
            levels: layer.get("levels")?,
            methods: layer.get_list("methods")?,
            edge_weight: layer.get("edge_weight")?,
            aggregation: layer.get("aggregation")?,
            include_query: layer.get("include_query")?.unwrap_or(true),
            ks: layer.get_list("k")?,
            seed: layer.get("seed")?,
            workers: layer.get("workers")?,
            dataset: layer.get("dataset")?,
            manifest: layer.get("manifest")?,
            db: layer.get_list("db")?,
            out: layer.get("out")?,
            skip_bad: layer.get("skip_bad")?.unwrap_or(false),
            synth: SynthConfig {
                classes: layer.get("classes")?.unwrap_or(defaults.classes),
                per_class: layer.get("per_class")?.unwrap_or(defaults.per_class),
                size: layer.get("size")?.unwrap_or(defaults.size),
                seed: layer.get("seed")?.unwrap_or(defaults.seed),
                separation: layer.get("separation")?.unwrap_or(defaults.separation),
                jitter: layer.get("jitter")?.unwrap_or(defaults.jitter),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if let Some(l) = self.levels {
            if !(1..=statgeo::features::MAX_LEVELS).contains(&l) {
                return Err(CliError::config(format!(
                    "levels must be in 1..={}, got {l}",
                    statgeo::features::MAX_LEVELS
                )));
            }
        }
        if self.ks.contains(&0) {
            return Err(CliError::config("K must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(CliError::config("workers must be at least 1"));
        }
        Ok(())
    }

    pub fn family(&self) -> Family {
        self.family.unwrap_or(DEFAULT_FAMILY)
    }

    pub fn levels(&self) -> usize {
        self.levels.unwrap_or(DEFAULT_LEVELS)
    }

    pub fn methods(&self) -> Vec<Method> {
        if self.methods.is_empty() {
            Method::ALL.to_vec()
        } else {
            self.methods.clone()
        }
    }

    pub fn layout(&self) -> Layout {
        match &self.manifest {
            Some(m) => Layout::PrefixMap { manifest: m.clone() },
            None => Layout::DirPerClass,
        }
    }
}
