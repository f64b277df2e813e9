//! Q-networks: LSTM baseline, LSTM + NTM, LSTM + LRUA.

use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use crate::autodiff::{Graph, NodeId, ParamSet, Tensor};
use crate::memory::lrua::{LruaMemory, LruaState};
use crate::memory::ntm::{NtmMemory, NtmState};
use crate::memory::MemoryConfig;
use crate::nn::{Lstm, LstmState, QHead};
use crate::rng::{self, Domain};
use crate::{data, Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Lstm,
    Ntm,
    Lrua,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Lstm, ModelKind::Ntm, ModelKind::Lrua];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Ntm => "ntm",
            ModelKind::Lrua => "lrua",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lstm" => Ok(ModelKind::Lstm),
            "ntm" => Ok(ModelKind::Ntm),
            "lrua" => Ok(ModelKind::Lrua),
            other => Err(Error::Config(alloc::format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub num_classes: usize,
    pub image_len: usize,
    pub hidden: usize,
    pub memory: MemoryConfig,
    pub init_scale: f64,
}

impl ModelConfig {
    pub fn new(kind: ModelKind, num_classes: usize) -> Self {
        ModelConfig {
            kind,
            num_classes,
            image_len: data::IMAGE_LEN,
            hidden: 200,
            memory: MemoryConfig::default(),
            init_scale: 0.05,
        }
    }

    /// Observation length: flattened image followed by the label hint.
    pub fn input_len(&self) -> usize {
        self.image_len + self.num_classes
    }

    pub fn num_actions(&self) -> usize {
        self.num_classes + 1
    }

    pub fn validate(&self) -> Result<()> {
        let mem = &self.memory;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.num_classes == 0 {
            return bad("num_classes must be at least 1");
        }
        if self.hidden == 0 || self.image_len == 0 {
            return bad("hidden and image sizes must be positive");
        }
        if self.kind != ModelKind::Lstm {
            if mem.slots == 0 || mem.width == 0 || mem.read_heads == 0 {
                return bad("memory needs slots, width and at least one read head");
            }
            if self.kind == ModelKind::Ntm && mem.write_heads == 0 {
                return bad("ntm needs at least one write head");
            }
            if self.kind == ModelKind::Lrua && mem.read_heads > mem.slots {
                return bad("lrua needs at least as many slots as read heads");
            }
            if !(0.0..=1.0).contains(&mem.usage_decay) {
                return bad("usage decay must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Memory {
    None,
    Ntm(NtmMemory),
    Lrua(LruaMemory),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MemoryState<T> {
    None,
    Ntm(NtmState),
    Lrua(LruaState<T>),
}

impl<T> MemoryState<T> {
    pub fn memory(&self) -> Option<NodeId> {
        match self {
            MemoryState::None => None,
            MemoryState::Ntm(s) => Some(s.memory),
            MemoryState::Lrua(s) => Some(s.memory),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<T> {
    pub lstm: LstmState,
    pub memory: MemoryState<T>,
}

/// A Q-network: parameters plus the layout that interprets them.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork<T> {
    config: ModelConfig,
    params: ParamSet<T>,
    lstm: Lstm,
    memory: Memory,
    head: QHead,
}

impl<T: Real> QNetwork<T> {
    /// Fresh network initialized from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::stream(seed, Domain::Init, 0, 0);
        let mut params = ParamSet::new();
        let scale = config.init_scale;
        let lstm = Lstm::register(&mut params, "lstm", config.input_len(), config.hidden, scale, &mut rng);
        let (memory, features) = match config.kind {
            ModelKind::Lstm => (Memory::None, config.hidden),
            ModelKind::Ntm => {
                let m = NtmMemory::register(&mut params, config.memory, config.hidden, scale, &mut rng);
                let f = m.feature_size();
                (Memory::Ntm(m), f)
            }
            ModelKind::Lrua => {
                let m = LruaMemory::register(&mut params, config.memory, config.hidden, scale, &mut rng);
                let f = m.feature_size();
                (Memory::Lrua(m), f)
            }
        };
        let head = QHead::register(&mut params, features, config.num_classes, scale, &mut rng);
        Ok(QNetwork { config, params, lstm, memory, head })
    }

    /// Network with the given parameters; names and shapes must match the
    /// layout implied by `config`.
    pub fn from_params(config: ModelConfig, params: ParamSet<T>) -> Result<Self> {
        let mut net = Self::new(config, 0)?;
        net.params.assign_from(&params)?;
        Ok(net)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn lstm(&self) -> &Lstm {
        &self.lstm
    }

    pub fn head(&self) -> &QHead {
        &self.head
    }

    pub fn cast<U: Real>(&self) -> QNetwork<U> {
        QNetwork {
            config: self.config,
            params: self.params.cast(),
            lstm: self.lstm,
            memory: self.memory.clone(),
            head: self.head,
        }
    }

    /// Episode-start state: zero LSTM state and freshly reset memory.
    pub fn reset(&self, g: &mut Graph<'_, T>) -> Result<ModelState<T>> {
        let lstm = self.lstm.zero_state(g)?;
        let memory = match &self.memory {
            Memory::None => MemoryState::None,
            Memory::Ntm(m) => MemoryState::Ntm(m.reset(g)?),
            Memory::Lrua(m) => MemoryState::Lrua(m.reset(g)?),
        };
        Ok(ModelState { lstm, memory })
    }

    pub fn observation(&self, g: &mut Graph<'_, T>, obs: &[f32]) -> Result<NodeId> {
        let t = Tensor::new(&[obs.len()], obs.iter().map(|&v| T::from_f64(v as f64)).collect())?;
        g.constant(t)
    }

    pub fn controller(&self, g: &mut Graph<'_, T>, obs: NodeId, state: &LstmState) -> Result<(NodeId, LstmState)> {
        self.lstm.step(g, obs, state)
    }

    /// Memory step (writes only if `allow_write`) followed by the Q-head.
    pub fn read_out(
        &self,
        g: &mut Graph<'_, T>,
        controller_out: NodeId,
        memory: &MemoryState<T>,
        allow_write: bool,
    ) -> Result<(NodeId, MemoryState<T>)> {
        let (features, memory) = match (&self.memory, memory) {
            (Memory::None, MemoryState::None) => (controller_out, MemoryState::None),
            (Memory::Ntm(m), MemoryState::Ntm(s)) => {
                let (f, s) = m.step(g, controller_out, s, allow_write)?;
                (f, MemoryState::Ntm(s))
            }
            (Memory::Lrua(m), MemoryState::Lrua(s)) => {
                let (f, s) = m.step(g, controller_out, s, allow_write)?;
                (f, MemoryState::Lrua(s))
            }
            _ => return Err(Error::Config(String::from("memory state does not belong to this network"))),
        };
        Ok((self.head.forward(g, features)?, memory))
    }

    /// Full step: controller, memory, head. Returns the Q-value node.
    pub fn step(&self, g: &mut Graph<'_, T>, obs: NodeId, state: &ModelState<T>, allow_write: bool) -> Result<(NodeId, ModelState<T>)> {
        let (ctrl, lstm) = self.controller(g, obs, &state.lstm)?;
        let (q, memory) = self.read_out(g, ctrl, &state.memory, allow_write)?;
        Ok((q, ModelState { lstm, memory }))
    }
}
