//! Key-value run configuration.
//!
//! Files hold one `key = value` pair per line; `#` starts a comment. Keys use
//! the CLI flag names with underscores, so `--cms-multiplier 2` and
//! `cms_multiplier = 2` are the same setting.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use roal_core::cms::CmsConfig;
use roal_core::model::{ModelConfig, ModelKind};
use roal_core::trainer::TrainConfig;
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Everything a `train` invocation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    /// Omniglot directory, cache file or `synth[:classes:samples:noise:seed]`.
    pub data: String,
    pub out: PathBuf,
    /// Number of training classes; `None` picks the default for the dataset size.
    pub train_classes: Option<usize>,
    pub split_seed: u64,
    pub log_every: u64,
    pub checkpoint_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut train = TrainConfig::new(ModelConfig::new(ModelKind::Lrua, 5));
        train.total_batches = 1000;
        train.eval_batches = 20;
        RunConfig {
            train,
            data: "synth".into(),
            out: PathBuf::from("run"),
            train_classes: None,
            split_seed: 0,
            log_every: 50,
            checkpoint_every: 500,
        }
    }
}

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value.trim().parse().map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

/// Keys that define the network and the optimization problem, in the order
/// they are written to checkpoint headers.
pub const TRAIN_KEYS: &[&str] = &[
    "model",
    "classes",
    "image_len",
    "hidden",
    "init_scale",
    "memory_slots",
    "memory_width",
    "read_heads",
    "write_heads",
    "usage_decay",
    "items_per_class",
    "batch_size",
    "batches",
    "discount",
    "epsilon",
    "eval_batches",
    "cms_multiplier",
    "margin_steps",
    "learning_rate",
    "beta1",
    "beta2",
    "adam_epsilon",
    "seed",
];

pub fn train_value(cfg: &TrainConfig, key: &str) -> Option<String> {
    let m = &cfg.model;
    Some(match key {
        "model" => m.kind.to_string(),
        "classes" => m.num_classes.to_string(),
        "image_len" => m.image_len.to_string(),
        "hidden" => m.hidden.to_string(),
        "init_scale" => m.init_scale.to_string(),
        "memory_slots" => m.memory.slots.to_string(),
        "memory_width" => m.memory.width.to_string(),
        "read_heads" => m.memory.read_heads.to_string(),
        "write_heads" => m.memory.write_heads.to_string(),
        "usage_decay" => m.memory.usage_decay.to_string(),
        "items_per_class" => cfg.items_per_class.to_string(),
        "batch_size" => cfg.episodes_per_batch.to_string(),
        "batches" => cfg.total_batches.to_string(),
        "discount" => cfg.discount.to_string(),
        "epsilon" => cfg.epsilon.to_string(),
        "eval_batches" => cfg.eval_batches.to_string(),
        "cms_multiplier" => (if cfg.cms.enabled { cfg.cms.pool_multiplier } else { 0 }).to_string(),
        "margin_steps" => cfg.cms.margin_steps.to_string(),
        "learning_rate" => cfg.adam.learning_rate.to_string(),
        "beta1" => cfg.adam.beta1.to_string(),
        "beta2" => cfg.adam.beta2.to_string(),
        "adam_epsilon" => cfg.adam.epsilon.to_string(),
        "seed" => cfg.seed.to_string(),
        _ => return None,
    })
}

/// Applies one training key. Returns `Ok(false)` for keys it does not own.
pub fn set_train_value(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<bool> {
    let m = &mut cfg.model;
    match key {
        "model" => m.kind = parse(key, value)?,
        "classes" => m.num_classes = parse(key, value)?,
        "image_len" => m.image_len = parse(key, value)?,
        "hidden" => m.hidden = parse(key, value)?,
        "init_scale" => m.init_scale = parse(key, value)?,
        "memory_slots" => m.memory.slots = parse(key, value)?,
        "memory_width" => m.memory.width = parse(key, value)?,
        "read_heads" => m.memory.read_heads = parse(key, value)?,
        "write_heads" => m.memory.write_heads = parse(key, value)?,
        "usage_decay" => m.memory.usage_decay = parse(key, value)?,
        "items_per_class" => cfg.items_per_class = parse(key, value)?,
        "batch_size" => cfg.episodes_per_batch = parse(key, value)?,
        "batches" => cfg.total_batches = parse(key, value)?,
        "discount" => cfg.discount = parse(key, value)?,
        "epsilon" => cfg.epsilon = parse(key, value)?,
        "eval_batches" => cfg.eval_batches = parse(key, value)?,
        "cms_multiplier" => {
            let steps = cfg.cms.margin_steps;
            cfg.cms = CmsConfig { margin_steps: steps, ..CmsConfig::with_multiplier(parse(key, value)?) };
        }
        "margin_steps" => cfg.cms.margin_steps = parse(key, value)?,
        "learning_rate" => cfg.adam.learning_rate = parse(key, value)?,
        "beta1" => cfg.adam.beta1 = parse(key, value)?,
        "beta2" => cfg.adam.beta2 = parse(key, value)?,
        "adam_epsilon" => cfg.adam.epsilon = parse(key, value)?,
        "seed" => cfg.seed = parse(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

/// Short stable digest of every training key.
pub fn config_hash(cfg: &TrainConfig) -> String {
    let mut text = String::new();
    for key in TRAIN_KEYS {
        let _ = writeln!(text, "{key}={}", train_value(cfg, key).unwrap_or_default());
    }
    let digest = Sha256::digest(text.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        if set_train_value(&mut self.train, &key, value)? {
            return Ok(());
        }
        match key.as_str() {
            "data" => self.data = value.trim().to_string(),
            "out" => self.out = PathBuf::from(value.trim()),
            "train_classes" => self.train_classes = Some(parse(&key, value)?),
            "split_seed" => self.split_seed = parse(&key, value)?,
            "log_every" => self.log_every = parse(&key, value)?,
            "checkpoint_every" => self.checkpoint_every = parse(&key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines from `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got {raw:?}", n + 1)))?;
            self.set(key, value).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// The configuration as a file that [`RunConfig::apply_text`] reads back.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in TRAIN_KEYS {
            let _ = writeln!(out, "{key} = {}", train_value(&self.train, key).unwrap_or_default());
        }
        let _ = writeln!(out, "data = {}", self.data);
        let _ = writeln!(out, "out = {}", self.out.display());
        if let Some(n) = self.train_classes {
            let _ = writeln!(out, "train_classes = {n}");
        }
        let _ = writeln!(out, "split_seed = {}", self.split_seed);
        let _ = writeln!(out, "log_every = {}", self.log_every);
        let _ = writeln!(out, "checkpoint_every = {}", self.checkpoint_every);
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("model = ntm\nclasses = 3 # three\n\ncms_multiplier = 3\nlearning_rate = 0.0005\ntrain_classes=60\n")
            .unwrap();
        assert_eq!(cfg.train.model.kind, ModelKind::Ntm);
        assert_eq!(cfg.train.model.num_classes, 3);
        assert!(cfg.train.cms.enabled);
        assert_eq!(cfg.train.cms.pool_multiplier, 3);
        assert_eq!(cfg.train.adam.learning_rate, 5e-4);
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn multiplier_zero_disables_cms_and_keeps_steps() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("margin_steps = 6\ncms_multiplier = 2\ncms_multiplier = 0").unwrap();
        assert!(!cfg.train.cms.enabled);
        assert_eq!(cfg.train.cms.margin_steps, 6);
    }

    #[test]
    fn errors_name_the_line() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply_text("classes = 3\nbogus = 1").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let err = cfg.apply_text("classes three").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
        assert!(cfg.apply_text("classes = -3").is_err());
        assert!(cfg.apply_text("model = gru").is_err());
    }

    #[test]
    fn hash_tracks_every_training_key() {
        let base = TrainConfig::new(ModelConfig::new(ModelKind::Lrua, 3));
        let h = config_hash(&base);
        assert_eq!(h.len(), 16);
        assert_eq!(h, config_hash(&base));
        let mut other = base;
        other.discount = 0.25;
        assert_ne!(h, config_hash(&other));
        for key in TRAIN_KEYS {
            assert!(train_value(&base, key).is_some(), "{key}");
        }
    }
}
