//! Least Recently Used Access memory.
//!
//! Reads are purely content based. Each write goes either to the slot the
//! paired read head looked at last step or to the least used slot, mixed by a
//! learned gate. When the gate leans towards the least used slot, that slot is
//! cleared before the additive write.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::ntm::{content_weights, memory_dims, read};
use super::{MemoryConfig, MEMORY_RESET_VALUE};
use crate::autodiff::{Graph, NodeId, ParamSet, Tensor};
use crate::nn::{one_hot, Linear};
use crate::{Real, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LruaState<T> {
    pub memory: NodeId,
    pub read_weights: Vec<NodeId>,
    /// Decayed sum of read and write attention; not differentiated.
    pub usage: Vec<T>,
    pub prev_write_weights: Vec<NodeId>,
}

/// Slot order by increasing usage, ties broken by lower index.
fn usage_order<T: Real>(usage: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..usage.len()).collect();
    order.sort_by(|&a, &b| usage[a].partial_cmp(&usage[b]).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b)));
    order
}

/// Binary indicator of the `n` least used slots (ties go to the lowest index).
pub fn least_used_weights<T: Real>(usage: &[T], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); usage.len()];
    for &slot in usage_order(usage).iter().take(n) {
        out[slot] = T::one();
    }
    out
}

/// `gate * prev_read + (1 - gate) * least_used`.
pub fn lrua_write_weights<T: Real>(g: &mut Graph<'_, T>, prev_read: NodeId, least_used: NodeId, gate: NodeId) -> Result<NodeId> {
    let delta = g.sub(prev_read, least_used)?;
    let gated = g.mul(delta, gate)?;
    g.add(gated, least_used)
}

/// `decay * prev_usage + read_w + write_w`.
pub fn usage_update<T: Real>(prev_usage: &[T], read_w: &[T], write_w: &[T], decay: T) -> Vec<T> {
    prev_usage.iter().zip(read_w).zip(write_w).map(|((&u, &r), &w)| decay * u + r + w).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LruaMemory {
    pub config: MemoryConfig,
    pub controller_size: usize,
    /// Per head: key (M) and strength.
    read_heads: Vec<Linear>,
    /// Per head: add vector (M) and interpolation gate.
    write_heads: Vec<Linear>,
}

impl LruaMemory {
    pub fn register<T: Real, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        config: MemoryConfig,
        controller_size: usize,
        init_scale: f64,
        rng: &mut R,
    ) -> Self {
        let m = config.width;
        let mut read_heads = Vec::new();
        let mut write_heads = Vec::new();
        for i in 0..config.read_heads {
            read_heads.push(Linear::register(params, &alloc::format!("lrua.read{i}"), controller_size, m + 1, init_scale, rng));
            write_heads.push(Linear::register(params, &alloc::format!("lrua.write{i}"), controller_size, m + 1, init_scale, rng));
        }
        LruaMemory { config, controller_size, read_heads, write_heads }
    }

    pub fn feature_size(&self) -> usize {
        self.controller_size + self.config.read_heads * self.config.width
    }

    pub fn reset<T: Real>(&self, g: &mut Graph<'_, T>) -> Result<LruaState<T>> {
        let MemoryConfig { slots, width, read_heads, .. } = self.config;
        let memory = g.constant(Tensor::filled(&[slots, width], T::from_f64(MEMORY_RESET_VALUE)))?;
        let read_weights = (0..read_heads).map(|_| g.constant(one_hot(slots, 0))).collect::<Result<Vec<_>>>()?;
        let prev_write_weights =
            (0..read_heads).map(|_| g.constant(Tensor::zeros(&[slots]))).collect::<Result<Vec<_>>>()?;
        Ok(LruaState { memory, read_weights, usage: vec![T::zero(); slots], prev_write_weights })
    }

    /// Writes (if allowed), reads, and updates usage (only when writing).
    pub fn step<T: Real>(
        &self,
        g: &mut Graph<'_, T>,
        controller_out: NodeId,
        state: &LruaState<T>,
        allow_write: bool,
    ) -> Result<(NodeId, LruaState<T>)> {
        let m = self.config.width;
        let (n, _) = memory_dims(g, state.memory)?;
        let mut memory = state.memory;
        let mut write_weights = state.prev_write_weights.clone();
        if allow_write {
            let order = usage_order(&state.usage);
            for (i, head) in self.write_heads.iter().enumerate() {
                let raw = head.forward(g, controller_out)?;
                let add = g.slice(raw, 0, m)?;
                let add = g.tanh(add)?;
                let gate = g.slice(raw, m, 1)?;
                let gate = g.sigmoid(gate)?;
                let slot = order[i % n];
                let least_used = g.constant(one_hot(n, slot))?;
                let w = lrua_write_weights(g, state.read_weights[i], least_used, gate)?;
                if g.value(gate)[0] < T::from_f64(0.5) {
                    let mut mask = Tensor::filled(&[n, m], T::one());
                    mask.data_mut()[slot * m..(slot + 1) * m].fill(T::zero());
                    let mask = g.constant(mask)?;
                    memory = g.mul(memory, mask)?;
                }
                let col = g.reshape(w, &[n, 1])?;
                let add_row = g.reshape(add, &[1, m])?;
                let outer = g.matmul(col, add_row)?;
                memory = g.add(memory, outer)?;
                write_weights[i] = w;
            }
        }
        let mut read_weights = Vec::with_capacity(self.read_heads.len());
        let mut reads = Vec::with_capacity(self.read_heads.len());
        for head in &self.read_heads {
            let raw = head.forward(g, controller_out)?;
            let key = g.slice(raw, 0, m)?;
            let key = g.tanh(key)?;
            let strength = g.slice(raw, m, 1)?;
            let strength = g.softplus(strength)?;
            let w = content_weights(g, key, strength, memory)?;
            reads.push(read(g, memory, w)?);
            read_weights.push(w);
        }
        let usage = if allow_write {
            let sum_of = |ids: &[NodeId]| {
                let mut acc = vec![T::zero(); n];
                for &id in ids {
                    crate::autodiff::kernels::add_into(g.value(id), &mut acc);
                }
                acc
            };
            usage_update(&state.usage, &sum_of(&read_weights), &sum_of(&write_weights), T::from_f64(self.config.usage_decay))
        } else {
            state.usage.clone()
        };
        let mut parts = Vec::with_capacity(1 + reads.len());
        parts.push(controller_out);
        parts.extend_from_slice(&reads);
        let features = g.concat(&parts)?;
        Ok((features, LruaState { memory, read_weights, usage, prev_write_weights: write_weights }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn constant(g: &mut Graph<f64>, data: &[f64]) -> NodeId {
        g.constant(Tensor::vector(data.to_vec())).unwrap()
    }

    #[test]
    fn least_used_examples() {
        assert_eq!(least_used_weights(&[0.3, 0.1, 0.2], 1), vec![0.0, 1.0, 0.0]);
        assert_eq!(least_used_weights(&[0.5; 4], 1), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(least_used_weights(&[0.5, 0.2, 0.2, 0.1], 2), vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn least_used_matches_full_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..2000 {
            let n = rng.gen_range(2..40);
            // coarse values so ties are common
            let usage: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64 * 0.25).collect();
            let k = rng.gen_range(1..=2.min(n));
            let mut sorted: Vec<(f64, usize)> = usage.iter().copied().zip(0..).collect();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut oracle = vec![0.0; n];
            for &(_, i) in &sorted[..k] {
                oracle[i] = 1.0;
            }
            assert_eq!(least_used_weights(&usage, k), oracle, "{usage:?}");
        }
    }

    #[test]
    fn write_weight_gate_extremes() {
        let p = ParamSet::new();
        let mut g = Graph::new(&p);
        let prev = [0.125, 0.625, 0.25];
        let lu = [0.0, 0.0, 1.0];
        let (pn, ln) = (constant(&mut g, &prev), constant(&mut g, &lu));
        let one = constant(&mut g, &[1.0]);
        let zero = constant(&mut g, &[0.0]);
        let w = lrua_write_weights(&mut g, pn, ln, one).unwrap();
        assert_eq!(g.value(w), &prev);
        let w = lrua_write_weights(&mut g, pn, ln, zero).unwrap();
        assert_eq!(g.value(w), &lu);
    }

    #[test]
    fn write_weights_are_the_convex_combination() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.gen_range(2..12);
            let mut prev: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let s: f64 = prev.iter().sum();
            prev.iter_mut().for_each(|v| *v /= s);
            let lu = least_used_weights(&(0..n).map(|_| rng.gen_range(0.0..1.0)).collect::<Vec<f64>>(), 1);
            let gate = if rng.gen_bool(0.3) { 0.5 } else { rng.gen_range(0.0..1.0) };
            let p = ParamSet::new();
            let mut g = Graph::new(&p);
            let (pn, ln, gn) = (constant(&mut g, &prev), constant(&mut g, &lu), constant(&mut g, &[gate]));
            let w = lrua_write_weights(&mut g, pn, ln, gn).unwrap();
            for i in 0..n {
                assert!((g.value(w)[i] - (gate * prev[i] + (1.0 - gate) * lu[i])).abs() < 1e-6);
            }
            assert!((g.value(w).iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn usage_update_examples() {
        assert_eq!(usage_update(&[0.4, 0.7], &[0.0, 0.0], &[0.0, 0.0], 0.0), vec![0.0, 0.0]);
        assert_eq!(usage_update(&[0.4, 0.7], &[0.0, 0.0], &[0.0, 0.0], 1.0), vec![0.4, 0.7]);
    }

    #[test]
    fn usage_update_matches_recurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 6;
        let mut usage = vec![0.0f64; n];
        let mut oracle = vec![0.0f64; n];
        for _ in 0..5 {
            let r: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.5)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.5)).collect();
            usage = usage_update(&usage, &r, &w, 0.95);
            for i in 0..n {
                oracle[i] = 0.95 * oracle[i] + r[i] + w[i];
            }
        }
        for (a, b) in usage.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn gate_decides_the_write_target(
            usage in prop::collection::vec(0.0f64..3.0, 2..16),
            gate in 0.0f64..1.0,
            read_slot in 0usize..16,
        ) {
            let n = usage.len();
            let read_slot = read_slot % n;
            let lu = least_used_weights(&usage, 1);
            let lu_slot = lu.iter().position(|&v| v == 1.0).unwrap();
            prop_assume!(gate != 0.5);
            let p = ParamSet::new();
            let mut g = Graph::new(&p);
            let prev = crate::nn::one_hot::<f64>(n, read_slot).into_data();
            let (pn, ln, gn) = (constant(&mut g, &prev), constant(&mut g, &lu), constant(&mut g, &[gate]));
            let w = lrua_write_weights(&mut g, pn, ln, gn).unwrap();
            let argmax = crate::nn::QNetOutput::new(g.value(w).to_vec()).argmax();
            if read_slot != lu_slot {
                prop_assert_eq!(argmax, if gate < 0.5 { lu_slot } else { read_slot });
            }
        }

        #[test]
        fn untouched_slots_decay(
            usage in prop::collection::vec(0.0f64..3.0, 1..16),
            decay in 0.0f64..=1.0,
        ) {
            let zeros = vec![0.0; usage.len()];
            let next = usage_update(&usage, &zeros, &zeros, decay);
            for (a, b) in next.iter().zip(&usage) {
                prop_assert!(*a <= *b && *a >= 0.0);
            }
        }
    }

    fn memory(seed: u64, slots: usize) -> (ParamSet<f64>, LruaMemory) {
        let mut p = ParamSet::new();
        let cfg = MemoryConfig { slots, width: 4, read_heads: 1, write_heads: 1, usage_decay: 0.95 };
        let mem = LruaMemory::register(&mut p, cfg, 6, 0.8, &mut ChaCha8Rng::seed_from_u64(seed));
        (p, mem)
    }

    fn controller(g: &mut Graph<f64>, rng: &mut ChaCha8Rng) -> NodeId {
        let v: Vec<f64> = (0..6).map(|_| rng.gen_range(-3.0..3.0)).collect();
        constant(g, &v)
    }

    #[test]
    fn suppressed_step_keeps_memory_and_usage() {
        let (p, mem) = memory(2, 8);
        let mut g = Graph::new(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut state = mem.reset(&mut g).unwrap();
        for _ in 0..30 {
            let ctrl = controller(&mut g, &mut rng);
            let before: Vec<u64> = g.value(state.memory).iter().map(|v| v.to_bits()).collect();
            let (_, sim) = mem.step(&mut g, ctrl, &state, false).unwrap();
            let after: Vec<u64> = g.value(sim.memory).iter().map(|v| v.to_bits()).collect();
            assert_eq!(before, after);
            assert_eq!(sim.usage, state.usage);
            assert_eq!(sim.prev_write_weights, state.prev_write_weights);
            state = mem.step(&mut g, ctrl, &state, true).unwrap().1;
        }
    }

    #[test]
    fn first_write_targets_slot_zero() {
        let (mut p, mem) = memory(4, 6);
        // gate forced shut so the write is all least-used
        let b = p.id("lrua.write0.bias").unwrap();
        let w = p.id("lrua.write0.weight").unwrap();
        p.get_mut(w).data_mut()[4 * 6..].fill(0.0);
        p.get_mut(b).data_mut()[4] = -50.0;
        let mut g = Graph::new(&p);
        let state = mem.reset(&mut g).unwrap();
        let ctrl = constant(&mut g, &[0.5, -0.5, 0.2, 0.9, -0.1, 0.3]);
        let (_, next) = mem.step(&mut g, ctrl, &state, true).unwrap();
        let ww = g.value(next.prev_write_weights[0]);
        assert!(ww[0] > 1.0 - 1e-12);
        let rows = g.value(next.memory);
        assert!(rows[4..].iter().all(|&v| v == MEMORY_RESET_VALUE));
        assert!(rows[..4].iter().all(|&v| v != MEMORY_RESET_VALUE));
    }

    /// Tracks usage independently and checks every write against the
    /// least-used slot of the tracked usage.
    #[test]
    fn writes_follow_an_independent_usage_oracle() {
        let (p, mem) = memory(9, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let mut g = Graph::new(&p);
            let mut state = mem.reset(&mut g).unwrap();
            let mut oracle = vec![0.0f64; 10];
            for _ in 0..30 {
                let ctrl = controller(&mut g, &mut rng);
                let prev_read = g.value(state.read_weights[0]).to_vec();
                let target = (0..10).fold(0, |b, i| if oracle[i] < oracle[b] { i } else { b });
                let (_, next) = mem.step(&mut g, ctrl, &state, true).unwrap();
                let ww = g.value(next.prev_write_weights[0]).to_vec();
                let wr = g.value(next.read_weights[0]).to_vec();
                // recover the gate from a slot that is not the target
                let probe = (0..10).find(|&i| i != target && prev_read[i] > 1e-3);
                if let Some(i) = probe {
                    let gate = ww[i] / prev_read[i];
                    for j in 0..10 {
                        let lu = if j == target { 1.0 } else { 0.0 };
                        assert!((ww[j] - (gate * prev_read[j] + (1.0 - gate) * lu)).abs() < 1e-9);
                    }
                }
                for i in 0..10 {
                    oracle[i] = 0.95 * oracle[i] + wr[i] + ww[i];
                }
                for (a, b) in oracle.iter().zip(&next.usage) {
                    assert!((a - b).abs() < 1e-12);
                }
                state = next;
            }
        }
    }

    #[test]
    fn weights_stay_normalized_over_many_steps() {
        let (p, mem) = memory(6, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut steps = 0;
        while steps < 1000 {
            let mut g = Graph::new(&p);
            let mut state = mem.reset(&mut g).unwrap();
            for _ in 0..40 {
                let ctrl = controller(&mut g, &mut rng);
                let (features, next) = mem.step(&mut g, ctrl, &state, true).unwrap();
                assert_eq!(g.shape(features), &[6 + 4]);
                for &w in next.read_weights.iter().chain(&next.prev_write_weights) {
                    let v = g.value(w);
                    assert!(v.iter().all(|&x| x >= 0.0));
                    assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-6);
                }
                assert!(next.usage.iter().all(|&u| u >= 0.0));
                state = next;
                steps += 1;
            }
        }
    }
}
