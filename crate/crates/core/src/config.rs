//! Flat `key = value` configuration files.
//!
//! ```text
//! # loss
//! tnorm = product        # product | lukasiewicz
//! variant = balanced     # standard | balanced | xu
//! k = 2
//! epsilon = 0.01
//! w_impl = 0.01
//! w_disj = 100
//! beta = 0.99
//! # trainer
//! max_epochs = 200
//! batch_size = 32
//! learning_rate = 0.001
//! hidden = 128,64
//! semi_supervised = false
//! ```
//!
//! Unknown keys, repeated keys and malformed values are errors. `k` and
//! `epsilon` are only meaningful for the balanced variant but are always
//! accepted.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::losses::{LossConfig, LossVariant, TNormKind, DEFAULT_EPSILON, DEFAULT_K};
use crate::trainer::TrainConfig;

pub const LOSS_KEYS: [&str; 7] = [
    "tnorm", "variant", "k", "epsilon", "w_impl", "w_disj", "beta",
];
pub const TRAINER_KEYS: [&str; 5] = [
    "max_epochs",
    "batch_size",
    "learning_rate",
    "hidden",
    "semi_supervised",
];

/// Parsed `key = value` pairs in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub entries: Vec<(String, String, usize)>,
}

impl ConfigFile {
    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(source, i + 1, "expected `key = value`"))?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().to_string();
            if !LOSS_KEYS.contains(&key.as_str()) && !TRAINER_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "{}:{}: unknown key `{key}`",
                    source.display(),
                    i + 1
                )));
            }
            if !seen.insert(key.clone()) {
                return Err(Error::Config(format!(
                    "{}:{}: duplicate key `{key}`",
                    source.display(),
                    i + 1
                )));
            }
            entries.push((key, value, i + 1));
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.entries
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, line)| (v.as_str(), *line))
    }

    fn number(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| {
                    Error::Config(format!("line {line}: `{key}` expects a number, got `{v}`"))
                }),
        }
    }

    fn count(&self, key: &str) -> Result<Option<usize>> {
        match self.get(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<usize>().map(Some).map_err(|_| {
                Error::Config(format!("line {line}: `{key}` expects a count, got `{v}`"))
            }),
        }
    }

    /// Loss section over the defaults, validated.
    pub fn loss_config(&self) -> Result<LossConfig> {
        let mut cfg = LossConfig::default();
        if let Some((v, _)) = self.get("tnorm") {
            cfg.tnorm = v.parse::<TNormKind>()?;
        }
        let k = self.number("k")?.unwrap_or(DEFAULT_K);
        let epsilon = self.number("epsilon")?.unwrap_or(DEFAULT_EPSILON);
        cfg.variant = match self.get("variant").map(|(v, _)| v.to_ascii_lowercase()) {
            None => LossVariant::FuzzyStandard,
            Some(v) => parse_variant(&v, k, epsilon)?,
        };
        if let Some(w) = self.number("w_impl")? {
            cfg.w_impl = w;
        }
        if let Some(w) = self.number("w_disj")? {
            cfg.w_disj = w;
        }
        if let Some(b) = self.number("beta")? {
            cfg.beta = b;
        }
        if !matches!(cfg.variant, LossVariant::FuzzyBalanced { .. }) {
            // still range-check k and epsilon so typos surface
            if self.get("k").is_some() && k <= 1.0 {
                return Err(Error::Config(format!("k must be > 1, got {k}")));
            }
            if self.get("epsilon").is_some() && epsilon <= 0.0 {
                return Err(Error::Config(format!("epsilon must be > 0, got {epsilon}")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Trainer section over the defaults, with the loss section embedded.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let mut tc = TrainConfig {
            loss: self.loss_config()?,
            ..Default::default()
        };
        if let Some(n) = self.count("max_epochs")? {
            tc.max_epochs = n;
        }
        if let Some(n) = self.count("batch_size")? {
            tc.batch_size = n;
        }
        if let Some(lr) = self.number("learning_rate")? {
            tc.learning_rate = lr;
        }
        if let Some((v, line)) = self.get("hidden") {
            tc.hidden_dims = if v.is_empty() || v == "none" {
                Vec::new()
            } else {
                v.split(',')
                    .map(|s| s.trim().parse::<usize>().ok().filter(|&n| n > 0))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "line {line}: `hidden` expects positive widths, got `{v}`"
                        ))
                    })?
            };
        }
        if let Some((v, line)) = self.get("semi_supervised") {
            tc.semi_supervised = match v.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" => true,
                "false" | "0" | "no" => false,
                _ => {
                    return Err(Error::Config(format!(
                        "line {line}: `semi_supervised` expects true/false, got `{v}`"
                    )))
                }
            };
        }
        tc.validate()?;
        Ok(tc)
    }
}

pub fn parse_variant(name: &str, k: f64, epsilon: f64) -> Result<LossVariant> {
    match name {
        "standard" | "fuzzy" => Ok(LossVariant::FuzzyStandard),
        "balanced" => Ok(LossVariant::FuzzyBalanced { k, epsilon }),
        "xu" | "semantic" => Ok(LossVariant::XuSemantic),
        other => Err(Error::Config(format!("unknown loss variant `{other}`"))),
    }
}

pub fn load_loss_config(path: &Path) -> Result<LossConfig> {
    ConfigFile::load(path)?.loss_config()
}

pub fn load_train_config(path: &Path) -> Result<TrainConfig> {
    ConfigFile::load(path)?.train_config()
}
