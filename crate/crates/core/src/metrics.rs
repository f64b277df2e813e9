//! Per-instance accuracy and request-rate accounting.
//!
//! Steps are bucketed by instance index (the k-th time a class shows up in
//! an episode). Accuracy only counts steps where the agent predicted.

use alloc::vec::Vec;

use crate::env::EpisodeStep;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InstanceStats {
    pub steps: u64,
    pub requests: u64,
    pub predictions: u64,
    pub correct: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetrics {
    per_instance: Vec<InstanceStats>,
    episodes: u64,
    total_reward: f64,
}

/// One row of the per-instance table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub instance_index: usize,
    pub accuracy_pct: Option<f64>,
    pub request_pct: Option<f64>,
    pub n_predictions: u64,
    pub n_requests: u64,
}

impl RunMetrics {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one complete episode.
    pub fn accumulate(&mut self, steps: &[EpisodeStep], num_classes: usize) {
        self.episodes += 1;
        for step in steps {
            let k = step.instance_index;
            if k == 0 {
                continue;
            }
            if self.per_instance.len() < k {
                self.per_instance.resize(k, InstanceStats::default());
            }
            let s = &mut self.per_instance[k - 1];
            s.steps += 1;
            if step.is_request(num_classes) {
                s.requests += 1;
            } else {
                s.predictions += 1;
                if step.action == step.true_slot {
                    s.correct += 1;
                }
            }
            self.total_reward += step.reward;
        }
    }

    pub fn merge(&mut self, other: &RunMetrics) {
        if self.per_instance.len() < other.per_instance.len() {
            self.per_instance.resize(other.per_instance.len(), InstanceStats::default());
        }
        for (a, b) in self.per_instance.iter_mut().zip(&other.per_instance) {
            a.steps += b.steps;
            a.requests += b.requests;
            a.predictions += b.predictions;
            a.correct += b.correct;
        }
        self.episodes += other.episodes;
        self.total_reward += other.total_reward;
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn max_instance(&self) -> usize {
        self.per_instance.len()
    }

    pub fn instance(&self, k: usize) -> InstanceStats {
        k.checked_sub(1).and_then(|i| self.per_instance.get(i)).copied().unwrap_or_default()
    }

    /// Percent correct among predictions at instance `k`; `None` if none were made.
    pub fn accuracy_pct(&self, k: usize) -> Option<f64> {
        let s = self.instance(k);
        (s.predictions > 0).then(|| 100.0 * s.correct as f64 / s.predictions as f64)
    }

    pub fn request_pct(&self, k: usize) -> Option<f64> {
        let s = self.instance(k);
        (s.steps > 0).then(|| 100.0 * s.requests as f64 / s.steps as f64)
    }

    pub fn totals(&self) -> InstanceStats {
        self.per_instance.iter().fold(InstanceStats::default(), |mut a, s| {
            a.steps += s.steps;
            a.requests += s.requests;
            a.predictions += s.predictions;
            a.correct += s.correct;
            a
        })
    }

    pub fn overall_accuracy_pct(&self) -> Option<f64> {
        let t = self.totals();
        (t.predictions > 0).then(|| 100.0 * t.correct as f64 / t.predictions as f64)
    }

    pub fn overall_request_pct(&self) -> Option<f64> {
        let t = self.totals();
        (t.steps > 0).then(|| 100.0 * t.requests as f64 / t.steps as f64)
    }

    pub fn mean_episode_reward(&self) -> Option<f64> {
        (self.episodes > 0).then(|| self.total_reward / self.episodes as f64)
    }

    pub fn rows(&self) -> Vec<MetricsRow> {
        (1..=self.per_instance.len())
            .map(|k| {
                let s = self.instance(k);
                MetricsRow {
                    instance_index: k,
                    accuracy_pct: self.accuracy_pct(k),
                    request_pct: self.request_pct(k),
                    n_predictions: s.predictions,
                    n_requests: s.requests,
                }
            })
            .collect()
    }
}
