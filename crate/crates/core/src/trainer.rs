//! Q-learning over episodes with full backpropagation through time.
//!
//! The Bellman target for step `t` bootstraps from the network's greedy value
//! at `t + 1`. That value comes from a side pass over the next observation in
//! which memory writes are disabled; the side pass is then discarded and the
//! real step `t + 1` runs from the unmodified state. Targets are constants
//! (no gradient flows through them) and there is no separate target network.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec::Vec;

use crate::autodiff::{Adam, AdamConfig, Graph, NodeId, ParamGrads, Tensor};
use crate::cms::{cms_select, CmsConfig};
use crate::data::Dataset;
use crate::env::{self, build_episode, build_episode_with_classes, EpisodeSpec, EpisodeStep};
use crate::metrics::RunMetrics;
use crate::model::{ModelConfig, QNetwork};
use crate::nn::QHead;
use crate::rng::{self, Domain};

use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub step: usize,
    /// Q-value of the executed action.
    pub q_taken: f64,
    pub reward: f64,
    /// `max_a Q` at the next step; `None` on the episode's last step.
    pub next_max_q: Option<f64>,
}

impl Transition {
    pub fn target(&self, discount: f64) -> f64 {
        match self.next_max_q {
            Some(next) => self.reward + discount * next,
            None => self.reward,
        }
    }
}

/// Mean squared Bellman error, evaluated directly on the recorded values.
pub fn bellman_loss_value(transitions: &[Transition], discount: f64) -> f64 {
    if transitions.is_empty() {
        return 0.0;
    }
    let total: f64 = transitions.iter().map(|t| (t.q_taken - t.target(discount)).powi(2)).sum();
    total / transitions.len() as f64
}

/// Mean squared Bellman error as a graph node. `q_taken[i]` is the
/// single-element node holding the taken action's Q-value for
/// `transitions[i]`; targets enter as constants.
pub fn bellman_loss<T: Real>(
    g: &mut Graph<'_, T>,
    q_taken: &[NodeId],
    transitions: &[Transition],
    discount: f64,
) -> Result<NodeId> {
    if q_taken.len() != transitions.len() || q_taken.is_empty() {
        return Err(Error::shape("bellman_loss", format!("{} q-values for {} transitions", q_taken.len(), transitions.len())));
    }
    let targets: Vec<T> = transitions.iter().map(|t| T::from_f64(t.target(discount))).collect();
    let q = g.concat(q_taken)?;
    let targets = g.constant(Tensor::vector(targets))?;
    let diff = g.sub(q, targets)?;
    let sq = g.mul(diff, diff)?;
    let total = g.sum(sq)?;
    g.scale(total, 1.0 / transitions.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutMode {
    /// Record the tape and next-state targets for learning.
    Train,
    /// Act only; no targets or gradients.
    Evaluate,
}

/// A finished episode together with the graph that produced it.
pub struct EpisodeTape<'p, T: Real> {
    graph: Graph<'p, T>,
    q_taken: Vec<NodeId>,
    pub steps: Vec<EpisodeStep>,
    pub transitions: Vec<Transition>,
    /// Side passes whose memory differed from the memory they started from.
    /// Always zero unless the write-suppression rule is broken.
    pub suppression_violations: usize,
}

impl<T: Real> EpisodeTape<'_, T> {
    /// Bellman loss for the episode and its parameter gradients.
    pub fn bellman(&mut self, discount: f64) -> Result<(f64, ParamGrads<T>)> {
        let loss = bellman_loss(&mut self.graph, &self.q_taken, &self.transitions, discount)?;
        let value = self.graph.value(loss)[0].as_f64();
        let grads = self.graph.backward(loss)?.param_grads(&self.graph);
        Ok((value, grads))
    }

    pub fn graph(&self) -> &Graph<'_, T> {
        &self.graph
    }
}

/// Plays one episode with epsilon-greedy actions.
pub fn rollout<'p, T: Real, R: rand::Rng + ?Sized>(
    net: &'p QNetwork<T>,
    spec: &EpisodeSpec,
    dataset: &Dataset,
    epsilon: f64,
    rng: &mut R,
    mode: RolloutMode,
) -> Result<EpisodeTape<'p, T>> {
    if spec.num_classes != net.config().num_classes {
        return Err(Error::Config(format!(
            "episode has {} classes, network expects {}",
            spec.num_classes,
            net.config().num_classes
        )));
    }
    let learn = mode == RolloutMode::Train;
    let c = spec.num_classes;
    let len = spec.len();
    let mut g = Graph::new(net.params());
    let mut state = net.reset(&mut g)?;
    let mut steps = Vec::with_capacity(len);
    let mut transitions = Vec::with_capacity(len);
    let mut q_taken = Vec::with_capacity(len);
    let mut suppression_violations = 0;

    let mut obs = env::observe(spec, dataset, 0, None)?;
    let obs_node = net.observation(&mut g, &obs)?;
    let (mut ctrl, mut lstm_next) = net.controller(&mut g, obs_node, &state.lstm)?;
    for t in 0..len {
        let (q, memory) = net.read_out(&mut g, ctrl, &state.memory, true)?;
        state.lstm = lstm_next;
        state.memory = memory;
        let out = QHead::output(&g, q);
        let action = env::epsilon_greedy(&out, epsilon, rng);
        let item = spec.items[t];
        let reward = env::reward(action, item.slot, c)?;
        if learn {
            q_taken.push(g.slice(q, action, 1)?);
        }

        let mut next_max_q = None;
        let mut next_obs = None;
        if t + 1 < len {
            let upcoming = env::observe(spec, dataset, t + 1, Some(action))?;
            let node = net.observation(&mut g, &upcoming)?;
            // The controller does not touch memory, so its step is shared by
            // the side pass and the real next step.
            let (next_ctrl, next_lstm) = net.controller(&mut g, node, &state.lstm)?;
            if learn {
                let mark = g.len();
                let (q_sim, sim_memory) = net.read_out(&mut g, next_ctrl, &state.memory, false)?;
                next_max_q = Some(QHead::output(&g, q_sim).max());
                if let (Some(before), Some(after)) = (state.memory.memory(), sim_memory.memory()) {
                    let same = g.value(before).iter().zip(g.value(after)).all(|(a, b)| a.as_f64().to_bits() == b.as_f64().to_bits());
                    if !same {
                        suppression_violations += 1;
                    }
                }
                g.truncate(mark);
            }
            ctrl = next_ctrl;
            lstm_next = next_lstm;
            next_obs = Some(upcoming);
        }
        transitions.push(Transition { step: t, q_taken: out.q_values[action], reward, next_max_q });
        let observation = core::mem::take(&mut obs);
        steps.push(EpisodeStep {
            observation,
            q_values: out.q_values,
            action,
            reward,
            true_slot: item.slot,
            instance_index: item.instance,
        });
        if let Some(o) = next_obs {
            obs = o;
        }
    }
    Ok(EpisodeTape { graph: g, q_taken, steps, transitions, suppression_violations })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub items_per_class: usize,
    pub episodes_per_batch: usize,
    pub total_batches: u64,
    pub discount: f64,
    pub epsilon: f64,
    pub eval_batches: u64,
    pub cms: CmsConfig,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(model: ModelConfig) -> Self {
        TrainConfig {
            model,
            items_per_class: env::DEFAULT_ITEMS_PER_CLASS,
            episodes_per_batch: 50,
            total_batches: 0,
            discount: 0.5,
            epsilon: 0.05,
            eval_batches: 0,
            cms: CmsConfig::disabled(),
            adam: AdamConfig::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.cms.validate()?;
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::Config(format!("discount {} outside [0, 1)", self.discount)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        if self.episodes_per_batch == 0 || self.items_per_class == 0 {
            return Err(Error::Config("episodes per batch and items per class must be positive".into()));
        }
        Ok(())
    }
}

/// Result of one training episode.
#[derive(Debug, Clone)]
pub struct EpisodeOutcome<T> {
    pub loss: f64,
    pub grads: ParamGrads<T>,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchStats {
    /// 1-based index of the batch just applied.
    pub batch: u64,
    /// Sum over the batch's episodes of each episode's mean Bellman error.
    pub loss: f64,
    pub mean_reward: f64,
    pub accuracy_pct: Option<f64>,
    pub request_pct: Option<f64>,
}

/// Owns the network and the optimizer state.
#[derive(Debug, Clone)]
pub struct Trainer<T: Real> {
    config: TrainConfig,
    net: QNetwork<T>,
    adam: Adam<T>,
    batches_done: u64,
}

impl<T: Real> Trainer<T> {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let net = QNetwork::new(config.model, config.seed)?;
        let adam = Adam::new(net.params(), config.adam);
        Ok(Trainer { config, net, adam, batches_done: 0 })
    }

    pub fn from_parts(config: TrainConfig, net: QNetwork<T>, adam: Adam<T>, batches_done: u64) -> Result<Self> {
        config.validate()?;
        if net.config() != &config.model {
            return Err(Error::Config("network does not match the training configuration".into()));
        }
        Ok(Trainer { config, net, adam, batches_done })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn network(&self) -> &QNetwork<T> {
        &self.net
    }

    pub fn optimizer(&self) -> &Adam<T> {
        &self.adam
    }

    pub fn batches_done(&self) -> u64 {
        self.batches_done
    }

    pub fn into_network(self) -> QNetwork<T> {
        self.net
    }

    /// Episode `episode` of the next batch. Depends only on the current
    /// parameters and the seed stream, so episodes may run in any order.
    pub fn run_train_episode(&self, dataset: &Dataset, episode: usize) -> Result<EpisodeOutcome<T>> {
        let cfg = &self.config;
        let c = cfg.model.num_classes;
        let mut rng = rng::stream(cfg.seed, Domain::Train, self.batches_done, episode as u64);
        let spec = if cfg.cms.enabled {
            let selection = cms_select(&self.net, dataset, c, &cfg.cms, &mut rng)?;
            build_episode_with_classes(dataset, &selection.selected, cfg.items_per_class, &mut rng)?
        } else {
            build_episode(dataset, c, cfg.items_per_class, &mut rng)?
        };
        let mut tape = rollout(&self.net, &spec, dataset, cfg.epsilon, &mut rng, RolloutMode::Train)?;
        let (loss, grads) = tape.bellman(cfg.discount)?;
        let mut metrics = RunMetrics::new();
        metrics.accumulate(&tape.steps, c);
        Ok(EpisodeOutcome { loss, grads, metrics })
    }

    /// Sums the batch's gradients in episode order and takes one Adam step.
    pub fn apply_batch(&mut self, outcomes: &[EpisodeOutcome<T>]) -> Result<BatchStats> {
        let mut grads = ParamGrads::zeros_like(self.net.params());
        let mut metrics = RunMetrics::new();
        let mut loss = 0.0;
        for o in outcomes {
            grads.accumulate(&o.grads)?;
            metrics.merge(&o.metrics);
            loss += o.loss;
        }
        self.adam.step(self.net.params_mut(), &grads)?;
        self.batches_done += 1;
        Ok(BatchStats {
            batch: self.batches_done,
            loss,
            mean_reward: metrics.mean_episode_reward().unwrap_or(0.0),
            accuracy_pct: metrics.overall_accuracy_pct(),
            request_pct: metrics.overall_request_pct(),
        })
    }

    /// One batch, episodes run sequentially.
    pub fn train_batch(&mut self, dataset: &Dataset) -> Result<BatchStats> {
        let outcomes = (0..self.config.episodes_per_batch)
            .map(|e| self.run_train_episode(dataset, e))
            .collect::<Result<Vec<_>>>()?;
        self.apply_batch(&outcomes)
    }

    /// Runs batches until `total_batches` have been applied.
    pub fn train(&mut self, dataset: &Dataset) -> Result<Vec<BatchStats>> {
        let mut history = Vec::new();
        while self.batches_done < self.config.total_batches {
            history.push(self.train_batch(dataset)?);
        }
        Ok(history)
    }

    pub fn run_eval_episode(&self, dataset: &Dataset, batch: u64, episode: usize) -> Result<RunMetrics> {
        evaluate_episode(&self.net, &self.config, dataset, batch, episode)
    }

    /// Greedy evaluation over `batches` batches; parameters are not touched.
    pub fn evaluate(&self, dataset: &Dataset, batches: u64) -> Result<RunMetrics> {
        let mut metrics = RunMetrics::new();
        for b in 0..batches {
            for e in 0..self.config.episodes_per_batch {
                metrics.merge(&self.run_eval_episode(dataset, b, e)?);
            }
        }
        Ok(metrics)
    }
}

/// One greedy evaluation episode drawn from the evaluation seed stream.
pub fn evaluate_episode<T: Real>(
    net: &QNetwork<T>,
    config: &TrainConfig,
    dataset: &Dataset,
    batch: u64,
    episode: usize,
) -> Result<RunMetrics> {
    let c = config.model.num_classes;
    let mut rng = rng::stream(config.seed, Domain::Eval, batch, episode as u64);
    let spec = build_episode(dataset, c, config.items_per_class, &mut rng)?;
    let tape = rollout(net, &spec, dataset, 0.0, &mut rng, RolloutMode::Evaluate)?;
    let mut metrics = RunMetrics::new();
    metrics.accumulate(&tape.steps, c);
    Ok(metrics)
}
