//! LSTM controller and the linear Q-value head.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::autodiff::{Graph, NodeId, ParamId, ParamSet, Tensor};
use crate::{Error, Real, Result};

/// Uniform initializer for weight matrices.
pub(crate) fn uniform_tensor<T: Real, R: Rng + ?Sized>(shape: &[usize], scale: f64, rng: &mut R) -> Tensor<T> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::from_f64(rng.gen_range(-scale..=scale))).collect();
    Tensor::new(shape, data).expect("shape matches data")
}

/// Affine map `y = W x + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn register<T: Real, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        inputs: usize,
        outputs: usize,
        init_scale: f64,
        rng: &mut R,
    ) -> Self {
        let weight = params.insert(&format!("{name}.weight"), uniform_tensor(&[outputs, inputs], init_scale, rng));
        let bias = params.insert(&format!("{name}.bias"), Tensor::zeros(&[outputs]));
        Linear { inputs, outputs, weight, bias }
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<'_, T>, x: NodeId) -> Result<NodeId> {
        let w = g.param(self.weight);
        let b = g.param(self.bias);
        let y = g.matmul(w, x)?;
        g.add(y, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmState {
    pub hidden: NodeId,
    pub cell: NodeId,
}

/// Single-layer LSTM with fused gate weights in `[input, forget, output, candidate]` order.
/// Input and recurrent weights are kept as separate matrices so a constant
/// input never needs an input gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lstm {
    pub inputs: usize,
    pub hidden: usize,
    input_weight: ParamId,
    recurrent_weight: ParamId,
    bias: ParamId,
}

impl Lstm {
    pub const FORGET_BIAS: f64 = 1.0;

    pub fn register<T: Real, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        inputs: usize,
        hidden: usize,
        init_scale: f64,
        rng: &mut R,
    ) -> Self {
        let input_weight = params.insert(&format!("{name}.input"), uniform_tensor(&[4 * hidden, inputs], init_scale, rng));
        let recurrent_weight =
            params.insert(&format!("{name}.recurrent"), uniform_tensor(&[4 * hidden, hidden], init_scale, rng));
        let mut bias = vec![T::zero(); 4 * hidden];
        for b in &mut bias[hidden..2 * hidden] {
            *b = T::from_f64(Self::FORGET_BIAS);
        }
        let bias = params.insert(&format!("{name}.bias"), Tensor::vector(bias));
        Lstm { inputs, hidden, input_weight, recurrent_weight, bias }
    }

    pub fn input_weight(&self) -> ParamId {
        self.input_weight
    }

    pub fn recurrent_weight(&self) -> ParamId {
        self.recurrent_weight
    }

    pub fn bias(&self) -> ParamId {
        self.bias
    }

    /// Zero hidden and cell state, used at every episode boundary.
    pub fn zero_state<T: Real>(&self, g: &mut Graph<'_, T>) -> Result<LstmState> {
        let hidden = g.constant(Tensor::zeros(&[self.hidden]))?;
        let cell = g.constant(Tensor::zeros(&[self.hidden]))?;
        Ok(LstmState { hidden, cell })
    }

    /// One time step. Returns the hidden output and the successor state;
    /// `state` itself is left untouched.
    pub fn step<T: Real>(&self, g: &mut Graph<'_, T>, input: NodeId, state: &LstmState) -> Result<(NodeId, LstmState)> {
        let h = self.hidden;
        if g.shape(input) != [self.inputs] {
            return Err(Error::shape("lstm_step", format!("input {:?}, expected [{}]", g.shape(input), self.inputs)));
        }
        if g.shape(state.hidden) != [h] || g.shape(state.cell) != [h] {
            return Err(Error::shape("lstm_step", format!("state must have {h} units")));
        }
        let wx = g.param(self.input_weight);
        let wh = g.param(self.recurrent_weight);
        let b = g.param(self.bias);
        let zx = g.matmul(wx, input)?;
        let zh = g.matmul(wh, state.hidden)?;
        let z = g.add(zx, zh)?;
        let z = g.add(z, b)?;
        let zi = g.slice(z, 0, h)?;
        let zf = g.slice(z, h, h)?;
        let zo = g.slice(z, 2 * h, h)?;
        let zg = g.slice(z, 3 * h, h)?;
        let i = g.sigmoid(zi)?;
        let f = g.sigmoid(zf)?;
        let o = g.sigmoid(zo)?;
        let cand = g.tanh(zg)?;
        let keep = g.mul(f, state.cell)?;
        let fresh = g.mul(i, cand)?;
        let cell = g.add(keep, fresh)?;
        let squashed = g.tanh(cell)?;
        let hidden = g.mul(o, squashed)?;
        Ok((hidden, LstmState { hidden, cell }))
    }
}

/// Q-values for `C` class predictions plus the request action, which is
/// always the last entry.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetOutput {
    pub q_values: Vec<f64>,
}

impl QNetOutput {
    pub fn new(q_values: Vec<f64>) -> Self {
        debug_assert!(q_values.len() >= 2);
        QNetOutput { q_values }
    }

    pub fn num_classes(&self) -> usize {
        self.q_values.len() - 1
    }

    pub fn request_index(&self) -> usize {
        self.q_values.len() - 1
    }

    /// Greedy action; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &q) in self.q_values.iter().enumerate().skip(1) {
            if q > self.q_values[best] {
                best = i;
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.q_values[self.argmax()]
    }
}

/// Linear output layer mapping features to `C + 1` action values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QHead {
    pub features: usize,
    pub num_classes: usize,
    linear: Linear,
}

impl QHead {
    pub fn register<T: Real, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        features: usize,
        num_classes: usize,
        init_scale: f64,
        rng: &mut R,
    ) -> Self {
        let linear = Linear::register(params, "head", features, num_classes + 1, init_scale, rng);
        QHead { features, num_classes, linear }
    }

    pub fn weight(&self) -> ParamId {
        self.linear.weight
    }

    pub fn bias(&self) -> ParamId {
        self.linear.bias
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<'_, T>, features: NodeId) -> Result<NodeId> {
        if g.shape(features) != [self.features] {
            return Err(Error::shape("q_head", format!("features {:?}, expected [{}]", g.shape(features), self.features)));
        }
        self.linear.forward(g, features)
    }

    pub fn output<T: Real>(g: &Graph<'_, T>, q: NodeId) -> QNetOutput {
        QNetOutput::new(g.value(q).iter().map(|v| v.as_f64()).collect())
    }
}

pub(crate) fn one_hot<T: Real>(len: usize, index: usize) -> Tensor<T> {
    let mut v = vec![T::zero(); len];
    v[index] = T::one();
    Tensor::vector(v)
}
