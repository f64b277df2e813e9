//! Neural Turing Machine memory with content and location addressing.

use alloc::vec::Vec;

use rand::Rng;

use super::{MemoryConfig, MEMORY_RESET_VALUE};
use crate::autodiff::{Graph, NodeId, ParamSet, Tensor};
use crate::nn::{one_hot, Linear};
use crate::{Error, Real, Result};

/// Offsets covered by the shift kernel, in logit order.
pub const SHIFT_OFFSETS: [isize; 3] = [-1, 0, 1];

#[derive(Debug, Clone, PartialEq)]
pub struct NtmState {
    pub memory: NodeId,
    pub read_weights: Vec<NodeId>,
    pub write_weights: Vec<NodeId>,
    pub last_read: Vec<NodeId>,
}

/// Content weights: `softmax(strength * cos(key, row_i))`.
pub fn content_weights<T: Real>(g: &mut Graph<'_, T>, key: NodeId, strength: NodeId, memory: NodeId) -> Result<NodeId> {
    let sim = g.cosine_similarity(key, memory)?;
    let scaled = g.mul(sim, strength)?;
    g.softmax(scaled)
}

/// Full NTM addressing: content focus, interpolation with the previous
/// weights, circular shift by -1/0/+1, then sharpening.
#[allow(clippy::too_many_arguments)]
pub fn address<T: Real>(
    g: &mut Graph<'_, T>,
    key: NodeId,
    strength: NodeId,
    gate: NodeId,
    shift_logits: NodeId,
    sharpen: NodeId,
    prev_weights: NodeId,
    memory: NodeId,
) -> Result<NodeId> {
    let n = g.shape(prev_weights)[0];
    if g.shape(shift_logits) != [SHIFT_OFFSETS.len()] {
        return Err(Error::shape("address", "shift kernel must have 3 logits"));
    }
    let content = content_weights(g, key, strength, memory)?;
    // gate * content + (1 - gate) * prev
    let delta = g.sub(content, prev_weights)?;
    let gated = g.mul(delta, gate)?;
    let gated = g.add(gated, prev_weights)?;

    let shift = g.softmax(shift_logits)?;
    let shifted = if n == 1 {
        gated
    } else {
        // offset +1 moves mass from slot i-1 to slot i
        let last = g.slice(gated, n - 1, 1)?;
        let head = g.slice(gated, 0, n - 1)?;
        let from_prev = g.concat(&[last, head])?;
        let first = g.slice(gated, 0, 1)?;
        let tail = g.slice(gated, 1, n - 1)?;
        let from_next = g.concat(&[tail, first])?;
        let s_minus = g.slice(shift, 0, 1)?;
        let s_zero = g.slice(shift, 1, 1)?;
        let s_plus = g.slice(shift, 2, 1)?;
        let a = g.mul(from_next, s_minus)?;
        let b = g.mul(gated, s_zero)?;
        let c = g.mul(from_prev, s_plus)?;
        let ab = g.add(a, b)?;
        g.add(ab, c)?
    };
    let powered = g.pow(shifted, sharpen)?;
    let total = g.sum(powered)?;
    g.div(powered, total)
}

/// Weighted sum of memory rows.
pub fn read<T: Real>(g: &mut Graph<'_, T>, memory: NodeId, weights: NodeId) -> Result<NodeId> {
    let (n, m) = memory_dims(g, memory)?;
    let row = g.reshape(weights, &[1, n])?;
    let r = g.matmul(row, memory)?;
    g.reshape(r, &[m])
}

/// Erase-then-add update: `M'[i] = M[i] * (1 - w[i] e) + w[i] a`.
pub fn write<T: Real>(g: &mut Graph<'_, T>, memory: NodeId, weights: NodeId, erase: NodeId, add: NodeId) -> Result<NodeId> {
    let (n, m) = memory_dims(g, memory)?;
    let col = g.reshape(weights, &[n, 1])?;
    let erase_row = g.reshape(erase, &[1, m])?;
    let add_row = g.reshape(add, &[1, m])?;
    let erase_mask = g.matmul(col, erase_row)?;
    let ones = g.constant(Tensor::filled(&[n, m], T::one()))?;
    let keep = g.sub(ones, erase_mask)?;
    let kept = g.mul(memory, keep)?;
    let added = g.matmul(col, add_row)?;
    g.add(kept, added)
}

pub(crate) fn memory_dims<T: Real>(g: &Graph<'_, T>, memory: NodeId) -> Result<(usize, usize)> {
    match *g.shape(memory) {
        [n, m] => Ok((n, m)),
        ref s => Err(Error::shape("memory", alloc::format!("expected [slots, width], got {s:?}"))),
    }
}

/// Addressing parameters after their range transforms.
pub struct HeadParams {
    pub key: NodeId,
    pub strength: NodeId,
    pub gate: NodeId,
    pub shift_logits: NodeId,
    pub sharpen: NodeId,
}

impl HeadParams {
    /// Layout of the raw head vector: key (M), strength, gate, 3 shift logits, sharpen.
    pub const fn raw_len(width: usize) -> usize {
        width + 6
    }

    fn from_raw<T: Real>(g: &mut Graph<'_, T>, raw: NodeId, width: usize) -> Result<Self> {
        let key = g.slice(raw, 0, width)?;
        let key = g.tanh(key)?;
        let strength = g.slice(raw, width, 1)?;
        let strength = g.softplus(strength)?;
        let gate = g.slice(raw, width + 1, 1)?;
        let gate = g.sigmoid(gate)?;
        let shift_logits = g.slice(raw, width + 2, 3)?;
        let sharpen = g.slice(raw, width + 5, 1)?;
        let sharpen = g.softplus(sharpen)?;
        let one = g.constant(Tensor::scalar(T::one()))?;
        let sharpen = g.add(sharpen, one)?;
        Ok(HeadParams { key, strength, gate, shift_logits, sharpen })
    }
}

/// Learned maps from controller output to head parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NtmMemory {
    pub config: MemoryConfig,
    pub controller_size: usize,
    read_heads: Vec<Linear>,
    write_heads: Vec<Linear>,
}

impl NtmMemory {
    pub fn register<T: Real, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        config: MemoryConfig,
        controller_size: usize,
        init_scale: f64,
        rng: &mut R,
    ) -> Self {
        let m = config.width;
        let read_heads = (0..config.read_heads)
            .map(|i| Linear::register(params, &alloc::format!("ntm.read{i}"), controller_size, HeadParams::raw_len(m), init_scale, rng))
            .collect();
        let write_heads = (0..config.write_heads)
            .map(|i| {
                Linear::register(params, &alloc::format!("ntm.write{i}"), controller_size, HeadParams::raw_len(m) + 2 * m, init_scale, rng)
            })
            .collect();
        NtmMemory { config, controller_size, read_heads, write_heads }
    }

    /// Size of the feature vector handed to the Q-head.
    pub fn feature_size(&self) -> usize {
        self.controller_size + self.config.read_heads * self.config.width
    }

    pub fn reset<T: Real>(&self, g: &mut Graph<'_, T>) -> Result<NtmState> {
        let MemoryConfig { slots, width, .. } = self.config;
        let memory = g.constant(Tensor::filled(&[slots, width], T::from_f64(MEMORY_RESET_VALUE)))?;
        let mut focus = || g.constant(one_hot(slots, 0));
        let read_weights = (0..self.config.read_heads).map(|_| focus()).collect::<Result<Vec<_>>>()?;
        let write_weights = (0..self.config.write_heads).map(|_| focus()).collect::<Result<Vec<_>>>()?;
        let last_read = (0..self.config.read_heads)
            .map(|_| g.constant(Tensor::filled(&[width], T::from_f64(MEMORY_RESET_VALUE))))
            .collect::<Result<Vec<_>>>()?;
        Ok(NtmState { memory, read_weights, write_weights, last_read })
    }

    /// Writes (if allowed), then reads. Returns `concat(controller, reads)`.
    pub fn step<T: Real>(
        &self,
        g: &mut Graph<'_, T>,
        controller_out: NodeId,
        state: &NtmState,
        allow_write: bool,
    ) -> Result<(NodeId, NtmState)> {
        let m = self.config.width;
        let mut memory = state.memory;
        let mut write_weights = state.write_weights.clone();
        if allow_write {
            for (i, head) in self.write_heads.iter().enumerate() {
                let raw = head.forward(g, controller_out)?;
                let p = HeadParams::from_raw(g, raw, m)?;
                let w = address(g, p.key, p.strength, p.gate, p.shift_logits, p.sharpen, state.write_weights[i], memory)?;
                let erase = g.slice(raw, HeadParams::raw_len(m), m)?;
                let erase = g.sigmoid(erase)?;
                let add = g.slice(raw, HeadParams::raw_len(m) + m, m)?;
                let add = g.tanh(add)?;
                memory = write(g, memory, w, erase, add)?;
                write_weights[i] = w;
            }
        }
        let mut read_weights = Vec::with_capacity(self.read_heads.len());
        let mut last_read = Vec::with_capacity(self.read_heads.len());
        for (i, head) in self.read_heads.iter().enumerate() {
            let raw = head.forward(g, controller_out)?;
            let p = HeadParams::from_raw(g, raw, m)?;
            let w = address(g, p.key, p.strength, p.gate, p.shift_logits, p.sharpen, state.read_weights[i], memory)?;
            last_read.push(read(g, memory, w)?);
            read_weights.push(w);
        }
        let mut parts = Vec::with_capacity(1 + last_read.len());
        parts.push(controller_out);
        parts.extend_from_slice(&last_read);
        let features = g.concat(&parts)?;
        Ok((features, NtmState { memory, read_weights, write_weights, last_read }))
    }
}
