//! Checkpoints: training configuration, parameters and Adam state.

use std::path::Path;

use roal_core::autodiff::{Adam, ParamSet, Tensor};
use roal_core::model::{ModelKind, QNetwork};
use roal_core::trainer::{TrainConfig, Trainer};

use crate::config::{self, TRAIN_KEYS};
use crate::container::Container;
use crate::{Error, FormatError, Result};

pub const KIND: &str = "checkpoint";

/// Everything needed to resume training or evaluate.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub batches_done: u64,
    pub params: ParamSet<f32>,
    pub adam: Adam<f32>,
    /// Run-level settings carried along for `eval` (data split and so on).
    pub extra: Vec<(String, String)>,
}

impl Checkpoint {
    pub fn from_trainer(trainer: &Trainer<f32>) -> Self {
        Checkpoint {
            config: *trainer.config(),
            batches_done: trainer.batches_done(),
            params: trainer.network().params().clone(),
            adam: trainer.optimizer().clone(),
            extra: Vec::new(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.config.model.kind
    }

    pub fn extra(&self, key: &str) -> Option<&str> {
        self.extra.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn network(&self) -> Result<QNetwork<f32>> {
        Ok(QNetwork::from_params(self.config.model, self.params.clone())?)
    }

    pub fn into_trainer(self) -> Result<Trainer<f32>> {
        let net = QNetwork::from_params(self.config.model, self.params)?;
        Ok(Trainer::from_parts(self.config, net, self.adam, self.batches_done)?)
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new(KIND);
        for key in TRAIN_KEYS {
            c.set(key, config::train_value(&self.config, key).unwrap_or_default());
        }
        c.set("config_hash", config::config_hash(&self.config));
        c.set("batches_done", self.batches_done);
        c.set("adam_step", self.adam.step_count());
        for (k, v) in &self.extra {
            c.set(&format!("run.{k}"), v);
        }
        let names = self.params.names();
        for (name, t) in self.params.iter() {
            c.push_array(&format!("param.{name}"), t.shape(), t.data().to_vec());
        }
        for (prefix, moments) in [("adam.m", self.adam.first_moments()), ("adam.v", self.adam.second_moments())] {
            for (name, m) in names.iter().zip(moments) {
                c.push_array(&format!("{prefix}.{name}"), &[m.len()], m.clone());
            }
        }
        c
    }

    /// Rebuilds a checkpoint; `expected` rejects other model kinds.
    pub fn from_container(c: &Container, expected: Option<ModelKind>) -> Result<Self, CheckpointError> {
        let kind = c.require("kind")?;
        if kind != KIND {
            return Err(FormatError::WrongKind { expected: KIND.into(), found: kind.into() }.into());
        }
        let found: ModelKind = c.parse("model")?;
        if let Some(expected) = expected.filter(|&e| e != found) {
            return Err(CheckpointError::ModelKindMismatch { expected, found });
        }
        let mut config = TrainConfig::new(roal_core::model::ModelConfig::new(found, 1));
        for key in TRAIN_KEYS {
            let value = c.require(key)?;
            let bad = || FormatError::BadValue { key: key.to_string(), value: value.to_string() };
            config::set_train_value(&mut config, key, value).map_err(|_| bad())?;
        }
        let stored = c.require("config_hash")?;
        let computed = config::config_hash(&config);
        if stored != computed {
            return Err(FormatError::HashMismatch { stored: stored.into(), computed }.into());
        }
        // The layout (names, shapes) comes from a fresh network of this configuration.
        let template: QNetwork<f32> =
            QNetwork::new(config.model, 0).map_err(|e| FormatError::Header(format!("invalid model config: {e}")))?;
        let mut params = ParamSet::new();
        let mut first = Vec::new();
        let mut second = Vec::new();
        for (name, t) in template.params().iter() {
            let a = c.array(&format!("param.{name}"))?;
            if a.shape != t.shape() {
                return Err(FormatError::Header(format!("parameter {name} has shape {:?}, expected {:?}", a.shape, t.shape()))
                    .into());
            }
            let tensor = Tensor::new(&a.shape, a.data.clone()).map_err(|e| FormatError::Header(e.to_string()))?;
            params.insert(name, tensor);
            for (prefix, out) in [("adam.m", &mut first), ("adam.v", &mut second)] {
                let m = c.array(&format!("{prefix}.{name}"))?;
                if m.data.len() != t.len() {
                    return Err(FormatError::Header(format!("{prefix}.{name} has {} values", m.data.len())).into());
                }
                out.push(m.data.clone());
            }
        }
        let adam = Adam::from_parts(config.adam, c.parse("adam_step")?, first, second)
            .map_err(|e| FormatError::Header(e.to_string()))?;
        let extra = c
            .meta()
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("run.").map(|k| (k.to_string(), v.clone())))
            .collect();
        Ok(Checkpoint { config, batches_done: c.parse("batches_done")?, params, adam, extra })
    }
}

/// Checkpoint decoding failures before a path is attached.
#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("checkpoint holds a {found} model, expected {expected}")]
    ModelKindMismatch { expected: ModelKind, found: ModelKind },
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    // Write then rename so an interrupted save never leaves a torn file behind.
    let tmp = path.with_extension("partial");
    checkpoint.to_container().save(&tmp)?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path, expected: Option<ModelKind>) -> Result<Checkpoint> {
    let c = Container::load(path)?;
    Checkpoint::from_container(&c, expected).map_err(|e| match e {
        CheckpointError::Format(f) => f.at(path),
        CheckpointError::ModelKindMismatch { expected, found } => Error::ModelKindMismatch { expected, found },
    })
}
