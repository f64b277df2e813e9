//! The stream-based active learning task.
//!
//! An episode shows `C * items_per_class` images in random order. Each class
//! gets a fresh random label slot per episode. After a label request the
//! next observation carries the requested item's slot as a one-hot hint;
//! otherwise the hint is all zeros.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::data::{ClassId, Dataset};
use crate::nn::QNetOutput;
use crate::{Error, Result};

pub const REQUEST_REWARD: f64 = -0.05;
pub const CORRECT_REWARD: f64 = 1.0;
pub const WRONG_REWARD: f64 = -1.0;
pub const DEFAULT_ITEMS_PER_CLASS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeItem {
    pub class_id: ClassId,
    /// Index of the image within its class.
    pub sample: usize,
    /// Episode-local label slot in `0..C`.
    pub slot: usize,
    /// 1-based count of this class's appearances so far, including this one.
    pub instance: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSpec {
    pub num_classes: usize,
    pub items_per_class: usize,
    pub class_ids: Vec<ClassId>,
    /// `label_permutation[i]` is the slot of `class_ids[i]`.
    pub label_permutation: Vec<usize>,
    pub items: Vec<EpisodeItem>,
}

impl EpisodeSpec {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn request_action(&self) -> usize {
        self.num_classes
    }

    /// Same items and order with slots remapped through `perm` (old slot -> new slot).
    pub fn relabeled(&self, perm: &[usize]) -> EpisodeSpec {
        let mut out = self.clone();
        for s in &mut out.label_permutation {
            *s = perm[*s];
        }
        for item in &mut out.items {
            item.slot = perm[item.slot];
        }
        out
    }
}

/// Samples `num_classes` distinct classes, then builds an episode from them.
pub fn build_episode<R: Rng + ?Sized>(
    dataset: &Dataset,
    num_classes: usize,
    items_per_class: usize,
    rng: &mut R,
) -> Result<EpisodeSpec> {
    let ids = sample_classes(dataset, num_classes, rng)?;
    build_episode_with_classes(dataset, &ids, items_per_class, rng)
}

/// Draws `count` distinct class ids uniformly, in draw order.
pub fn sample_classes<R: Rng + ?Sized>(dataset: &Dataset, count: usize, rng: &mut R) -> Result<Vec<ClassId>> {
    let total = dataset.num_classes();
    if count == 0 || count > total {
        return Err(Error::Data(format!("cannot draw {count} classes from {total}")));
    }
    let all = dataset.class_ids();
    Ok(index::sample(rng, total, count).into_iter().map(|i| all[i]).collect())
}

/// Episode over the given classes: fresh slot permutation, samples drawn
/// without replacement within each class, uniformly shuffled stream.
pub fn build_episode_with_classes<R: Rng + ?Sized>(
    dataset: &Dataset,
    class_ids: &[ClassId],
    items_per_class: usize,
    rng: &mut R,
) -> Result<EpisodeSpec> {
    let c = class_ids.len();
    if c == 0 || items_per_class == 0 {
        return Err(Error::Data(format!("episode needs classes and items (got {c} x {items_per_class})")));
    }
    let mut label_permutation: Vec<usize> = (0..c).collect();
    label_permutation.shuffle(rng);
    let mut items = Vec::with_capacity(c * items_per_class);
    for (i, &id) in class_ids.iter().enumerate() {
        let class = dataset.class(id)?;
        if class.len() < items_per_class {
            return Err(Error::Data(format!("class {id} has {} samples, need {items_per_class}", class.len())));
        }
        for sample in index::sample(rng, class.len(), items_per_class) {
            items.push(EpisodeItem { class_id: id, sample, slot: label_permutation[i], instance: 0 });
        }
    }
    items.shuffle(rng);
    let mut seen = vec![0usize; c];
    for item in &mut items {
        seen[item.slot] += 1;
        item.instance = seen[item.slot];
    }
    Ok(EpisodeSpec { num_classes: c, items_per_class, class_ids: class_ids.to_vec(), label_permutation, items })
}

/// Observation at step `t`: the item's image followed by the label hint.
pub fn observe(spec: &EpisodeSpec, dataset: &Dataset, t: usize, prev_action: Option<usize>) -> Result<Vec<f32>> {
    let item = spec.items.get(t).ok_or_else(|| Error::Data(format!("step {t} beyond episode of {}", spec.len())))?;
    let image = dataset.class(item.class_id)?.image(item.sample);
    let mut obs = Vec::with_capacity(image.len() + spec.num_classes);
    obs.extend_from_slice(image);
    obs.resize(image.len() + spec.num_classes, 0.0);
    if t > 0 && prev_action == Some(spec.request_action()) {
        obs[image.len() + spec.items[t - 1].slot] = 1.0;
    }
    Ok(obs)
}

/// Reward for taking `action` on an item whose slot is `true_slot`.
pub fn reward(action: usize, true_slot: usize, num_classes: usize) -> Result<f64> {
    if action > num_classes {
        return Err(Error::Action { action, num_actions: num_classes + 1 });
    }
    Ok(if action == num_classes {
        REQUEST_REWARD
    } else if action == true_slot {
        CORRECT_REWARD
    } else {
        WRONG_REWARD
    })
}

/// Greedy with probability `1 - epsilon`, otherwise uniform over all actions.
/// Always consumes the same amount of randomness per call.
pub fn epsilon_greedy<R: Rng + ?Sized>(q: &QNetOutput, epsilon: f64, rng: &mut R) -> usize {
    let explore_draw: f64 = rng.gen();
    let random_action = rng.gen_range(0..q.q_values.len());
    if explore_draw < epsilon {
        random_action
    } else {
        q.argmax()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStep {
    pub observation: Vec<f32>,
    /// Q-values the action was chosen from.
    pub q_values: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub true_slot: usize,
    pub instance_index: usize,
}

impl EpisodeStep {
    pub fn is_request(&self, num_classes: usize) -> bool {
        self.action == num_classes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_glyphs;
    use crate::rng::seeded;

    fn dataset() -> Dataset {
        synth_glyphs(6, 12, 0.1, 3).unwrap()
    }

    #[test]
    fn single_class_episode() {
        let ds = dataset();
        let spec = build_episode(&ds, 1, 10, &mut seeded(1)).unwrap();
        assert_eq!(spec.len(), 10);
        assert_eq!(spec.label_permutation, vec![0]);
        assert!(spec.items.iter().all(|i| i.slot == 0 && i.class_id == spec.class_ids[0]));
        let instances: Vec<usize> = spec.items.iter().map(|i| i.instance).collect();
        assert_eq!(instances, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn episode_structure() {
        let ds = dataset();
        let spec = build_episode(&ds, 3, 10, &mut seeded(2)).unwrap();
        assert_eq!(spec.len(), 30);
        let mut perm = spec.label_permutation.clone();
        perm.sort_unstable();
        assert_eq!(perm, vec![0, 1, 2]);
        for (i, &id) in spec.class_ids.iter().enumerate() {
            let items: Vec<&EpisodeItem> = spec.items.iter().filter(|it| it.class_id == id).collect();
            assert_eq!(items.len(), 10);
            assert!(items.iter().all(|it| it.slot == spec.label_permutation[i]));
            let mut samples: Vec<usize> = items.iter().map(|it| it.sample).collect();
            samples.sort_unstable();
            samples.dedup();
            assert_eq!(samples.len(), 10, "samples drawn without replacement");
            let k: Vec<usize> = items.iter().map(|it| it.instance).collect();
            assert_eq!(k, (1..=10).collect::<Vec<_>>());
        }
    }

    #[test]
    fn same_seed_same_episode() {
        let ds = dataset();
        let a = build_episode(&ds, 3, 10, &mut seeded(9)).unwrap();
        let b = build_episode(&ds, 3, 10, &mut seeded(9)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, build_episode(&ds, 3, 10, &mut seeded(10)).unwrap());
    }

    #[test]
    fn insufficient_data_is_a_data_error() {
        let ds = dataset();
        assert!(matches!(build_episode(&ds, 7, 10, &mut seeded(1)), Err(Error::Data(_))));
        assert!(matches!(build_episode(&ds, 2, 13, &mut seeded(1)), Err(Error::Data(_))));
        assert!(matches!(build_episode(&ds, 0, 10, &mut seeded(1)), Err(Error::Data(_))));
    }

    /// |observed - expected| <= 3 sigma for every bin of a multinomial.
    fn within_three_sigma(counts: &[usize], p: f64) {
        let n: usize = counts.iter().sum();
        let mean = n as f64 * p;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for &c in counts {
            assert!((c as f64 - mean).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn slot_assignment_is_uniform() {
        let ds = dataset();
        let mut rng = seeded(4);
        // slot given to the first drawn class, over 10,000 episodes
        let mut counts = [0usize; 3];
        for _ in 0..10_000 {
            let spec = build_episode(&ds, 3, 10, &mut rng).unwrap();
            counts[spec.label_permutation[0]] += 1;
        }
        within_three_sigma(&counts, 1.0 / 3.0);
    }

    #[test]
    fn exploration_is_uniform_over_actions() {
        let q = QNetOutput::new(vec![0.3, -1.0, 2.0]);
        let mut rng = seeded(5);
        let mut counts = [0usize; 3];
        for _ in 0..30_000 {
            counts[epsilon_greedy(&q, 1.0, &mut rng)] += 1;
        }
        within_three_sigma(&counts, 1.0 / 3.0);
    }

    #[test]
    fn greedy_when_epsilon_is_zero() {
        let q = QNetOutput::new(vec![0.3, -1.0, 0.1, 2.0]);
        let mut rng = seeded(6);
        assert!((0..100).all(|_| epsilon_greedy(&q, 0.0, &mut rng) == 3));
        let tied = QNetOutput::new(vec![1.0, 1.0, 0.0]);
        assert_eq!(epsilon_greedy(&tied, 0.0, &mut rng), 0);
    }

    #[test]
    fn rewards() {
        assert_eq!(reward(3, 1, 3).unwrap(), -0.05);
        assert_eq!(reward(1, 1, 3).unwrap(), 1.0);
        assert_eq!(reward(2, 1, 3).unwrap(), -1.0);
        assert_eq!(reward(4, 1, 3), Err(Error::Action { action: 4, num_actions: 4 }));
    }

    #[test]
    fn hint_follows_requests_only() {
        let ds = dataset();
        let spec = build_episode(&ds, 3, 2, &mut seeded(7)).unwrap();
        let hint = |obs: &[f32]| obs[crate::data::IMAGE_LEN..].to_vec();
        let first = observe(&spec, &ds, 0, None).unwrap();
        assert_eq!(first.len(), crate::data::IMAGE_LEN + 3);
        assert_eq!(&first[..crate::data::IMAGE_LEN], ds.class(spec.items[0].class_id).unwrap().image(spec.items[0].sample));
        assert_eq!(hint(&first), vec![0.0; 3]);
        // hand trace: request, predict, request
        let after_request = observe(&spec, &ds, 1, Some(3)).unwrap();
        let mut expected = vec![0.0; 3];
        expected[spec.items[0].slot] = 1.0;
        assert_eq!(hint(&after_request), expected);
        for prediction in 0..3 {
            assert_eq!(hint(&observe(&spec, &ds, 2, Some(prediction)).unwrap()), vec![0.0; 3]);
        }
        let mut expected = vec![0.0; 3];
        expected[spec.items[2].slot] = 1.0;
        assert_eq!(hint(&observe(&spec, &ds, 3, Some(3)).unwrap()), expected);
        assert!(observe(&spec, &ds, 6, None).is_err());
    }

    #[test]
    fn relabeling_moves_slots_only() {
        let ds = dataset();
        let spec = build_episode(&ds, 3, 4, &mut seeded(8)).unwrap();
        let perm = [2, 0, 1];
        let r = spec.relabeled(&perm);
        for (a, b) in spec.items.iter().zip(&r.items) {
            assert_eq!((a.class_id, a.sample, a.instance), (b.class_id, b.sample, b.instance));
            assert_eq!(b.slot, perm[a.slot]);
        }
    }
}
