use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::kernels::{add_into, axpy, axpy_many, dot};
use super::{ParamGrads, ParamId, ParamSet, Tensor};
use crate::{Error, Real, Result};

/// Index of a node in a [`Graph`]. Only valid for the graph that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

/// The closed set of differentiable operations.
///
/// Binary elementwise ops accept equal shapes, or a single-element operand
/// on either side which is broadcast.
#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    /// `[m,k] x [k]` or `[m,k] x [k,n]`.
    MatMul,
    Add,
    Sub,
    Mul,
    Div,
    /// Joins 1-D inputs end to end.
    Concat,
    Slice { start: usize, len: usize },
    Reshape(Vec<usize>),
    Sigmoid,
    Tanh,
    /// `ln(1 + e^x)`, the smooth rectifier used for positive head parameters.
    Softplus,
    /// Normalizes along the last axis.
    Softmax,
    /// Elementwise `base ^ exponent` with a single-element exponent.
    Pow,
    /// Cosine similarity of a key `[m]` against every row of `[n,m]`.
    CosineSimilarity,
    Scale(f64),
    SumReduce,
}

impl OpKind {
    fn name(&self) -> &'static str {
        match self {
            OpKind::MatMul => "matmul",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Div => "div",
            OpKind::Concat => "concat",
            OpKind::Slice { .. } => "slice",
            OpKind::Reshape(_) => "reshape",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Tanh => "tanh",
            OpKind::Softplus => "softplus",
            OpKind::Softmax => "softmax",
            OpKind::Pow => "pow",
            OpKind::CosineSimilarity => "cosine_similarity",
            OpKind::Scale(_) => "scale",
            OpKind::SumReduce => "sum",
        }
    }
}

/// Denominator floor for cosine similarity; a zero-norm operand yields 0.
pub const COSINE_EPS: f64 = 1e-8;

enum Source {
    Leaf,
    Param(ParamId),
    Op(OpKind, Vec<NodeId>),
}

struct Node<T> {
    source: Source,
    shape: Vec<usize>,
    /// Empty for parameter nodes, whose value lives in the borrowed set.
    value: Vec<T>,
    requires_grad: bool,
}

/// Operation tape. Nodes are appended in evaluation order, so the node list
/// is always a topological order.
pub struct Graph<'p, T: Real> {
    params: &'p ParamSet<T>,
    nodes: Vec<Node<T>>,
    param_nodes: Vec<Option<NodeId>>,
}

impl<'p, T: Real> Graph<'p, T> {
    pub fn new(params: &'p ParamSet<T>) -> Self {
        Graph { params, nodes: Vec::new(), param_nodes: vec![None; params.len()] }
    }

    pub fn params(&self) -> &'p ParamSet<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every node from `len` onwards. Ids issued after that point
    /// become invalid.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
        for slot in &mut self.param_nodes {
            if matches!(slot, Some(id) if id.0 >= len) {
                *slot = None;
            }
        }
    }

    pub fn value(&self, id: NodeId) -> &[T] {
        let node = &self.nodes[id.0];
        match node.source {
            Source::Param(p) => self.params.get(p).data(),
            _ => &node.value,
        }
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn tensor(&self, id: NodeId) -> Tensor<T> {
        Tensor::new(self.shape(id), self.value(id).to_vec()).expect("graph node shape is consistent")
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Adds an input tensor; it is differentiated if the tensor asks for it.
    pub fn leaf(&mut self, tensor: Tensor<T>) -> Result<NodeId> {
        check_finite("leaf", tensor.data())?;
        let requires_grad = tensor.requires_grad();
        let shape = tensor.shape().to_vec();
        Ok(self.push(Source::Leaf, shape, tensor.into_data(), requires_grad))
    }

    /// Adds a non-differentiated input.
    pub fn constant(&mut self, tensor: Tensor<T>) -> Result<NodeId> {
        self.leaf(tensor.with_grad(false))
    }

    /// The node standing for parameter `id`; created on first use.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(node) = self.param_nodes[id.0] {
            return node;
        }
        let shape = self.params.get(id).shape().to_vec();
        let node = self.push(Source::Param(id), shape, Vec::new(), true);
        self.param_nodes[id.0] = Some(node);
        node
    }

    fn push(&mut self, source: Source, shape: Vec<usize>, value: Vec<T>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node { source, shape, value, requires_grad });
        NodeId(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::MatMul, &[a, b])
    }
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Add, &[a, b])
    }
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Sub, &[a, b])
    }
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Mul, &[a, b])
    }
    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Div, &[a, b])
    }
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        self.apply(OpKind::Concat, parts)
    }
    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        self.apply(OpKind::Slice { start, len }, &[a])
    }
    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId> {
        self.apply(OpKind::Reshape(shape.to_vec()), &[a])
    }
    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Sigmoid, &[a])
    }
    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Tanh, &[a])
    }
    pub fn softplus(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Softplus, &[a])
    }
    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Softmax, &[a])
    }
    pub fn pow(&mut self, base: NodeId, exponent: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Pow, &[base, exponent])
    }
    pub fn cosine_similarity(&mut self, key: NodeId, memory: NodeId) -> Result<NodeId> {
        self.apply(OpKind::CosineSimilarity, &[key, memory])
    }
    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId> {
        self.apply(OpKind::Scale(factor), &[a])
    }
    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::SumReduce, &[a])
    }

    /// Evaluates `op` on `inputs` and records it.
    pub fn apply(&mut self, op: OpKind, inputs: &[NodeId]) -> Result<NodeId> {
        let name = op.name();
        let arity = match op {
            OpKind::Concat => None,
            OpKind::MatMul
            | OpKind::Add
            | OpKind::Sub
            | OpKind::Mul
            | OpKind::Div
            | OpKind::Pow
            | OpKind::CosineSimilarity => Some(2),
            _ => Some(1),
        };
        match arity {
            Some(n) if inputs.len() != n => {
                return Err(Error::shape(name, format!("expected {n} inputs, got {}", inputs.len())))
            }
            None if inputs.is_empty() => return Err(Error::shape(name, "no inputs")),
            _ => {}
        }
        let (shape, value) = self.evaluate(&op, inputs)?;
        check_finite(name, &value)?;
        let requires_grad = inputs.iter().any(|&i| self.nodes[i.0].requires_grad);
        Ok(self.push(Source::Op(op, inputs.to_vec()), shape, value, requires_grad))
    }

    fn evaluate(&self, op: &OpKind, inputs: &[NodeId]) -> Result<(Vec<usize>, Vec<T>)> {
        let name = op.name();
        let v = |i: usize| self.value(inputs[i]);
        let s = |i: usize| self.shape(inputs[i]);
        match op {
            OpKind::MatMul => {
                let (a, b) = (v(0), v(1));
                match (s(0), s(1)) {
                    (&[m, k], &[k2]) if k == k2 => {
                        Ok((vec![m], a.chunks_exact(k).map(|row| dot(row, b)).collect()))
                    }
                    (&[m, k], &[k2, n]) if k == k2 => {
                        let mut out = vec![T::zero(); m * n];
                        for (i, orow) in out.chunks_exact_mut(n).enumerate() {
                            for p in 0..k {
                                axpy(a[i * k + p], &b[p * n..(p + 1) * n], orow);
                            }
                        }
                        Ok((vec![m, n], out))
                    }
                    (sa, sb) => Err(Error::shape(name, format!("{sa:?} x {sb:?}"))),
                }
            }
            OpKind::Add | OpKind::Sub | OpKind::Mul | OpKind::Div => {
                let shape = broadcast_shape(name, s(0), s(1))?;
                let f: fn(T, T) -> T = match op {
                    OpKind::Add => |x, y| x + y,
                    OpKind::Sub => |x, y| x - y,
                    OpKind::Mul => |x, y| x * y,
                    _ => |x, y| x / y,
                };
                let (a, b) = (v(0), v(1));
                let n = a.len().max(b.len());
                let out = (0..n).map(|i| f(bcast(a, i), bcast(b, i))).collect();
                Ok((shape, out))
            }
            OpKind::Concat => {
                let mut out = Vec::new();
                for (i, &id) in inputs.iter().enumerate() {
                    if self.shape(id).len() != 1 {
                        return Err(Error::shape(name, format!("input {i} is not 1-D: {:?}", self.shape(id))));
                    }
                    out.extend_from_slice(self.value(id));
                }
                Ok((vec![out.len()], out))
            }
            &OpKind::Slice { start, len } => {
                let a = v(0);
                if len == 0 || start + len > a.len() {
                    return Err(Error::shape(name, format!("[{start}, {}) of {}", start + len, a.len())));
                }
                Ok((vec![len], a[start..start + len].to_vec()))
            }
            OpKind::Reshape(shape) => {
                let n: usize = shape.iter().product();
                if n != v(0).len() || shape.contains(&0) {
                    return Err(Error::shape(name, format!("{:?} -> {shape:?}", s(0))));
                }
                Ok((shape.clone(), v(0).to_vec()))
            }
            OpKind::Sigmoid => Ok((s(0).to_vec(), v(0).iter().map(|&x| sigmoid(x)).collect())),
            OpKind::Tanh => Ok((s(0).to_vec(), v(0).iter().map(|&x| x.tanh()).collect())),
            OpKind::Softplus => Ok((s(0).to_vec(), v(0).iter().map(|&x| softplus(x)).collect())),
            OpKind::Softmax => {
                let cols = *s(0).last().expect("non-empty shape");
                let mut out = v(0).to_vec();
                for row in out.chunks_exact_mut(cols) {
                    softmax_in_place(row);
                }
                Ok((s(0).to_vec(), out))
            }
            OpKind::Pow => {
                if v(1).len() != 1 {
                    return Err(Error::shape(name, format!("exponent must be scalar, got {:?}", s(1))));
                }
                let e = v(1)[0];
                Ok((s(0).to_vec(), v(0).iter().map(|&x| x.powf(e)).collect()))
            }
            OpKind::CosineSimilarity => {
                let (key, mem) = (v(0), v(1));
                match (s(0), s(1)) {
                    (&[m], &[_, m2]) if m == m2 => {
                        let eps = T::from_f64(COSINE_EPS);
                        let knorm = dot(key, key).sqrt();
                        let out = mem
                            .chunks_exact(m)
                            .map(|row| dot(key, row) / (knorm * dot(row, row).sqrt()).max(eps))
                            .collect::<Vec<_>>();
                        Ok((vec![out.len()], out))
                    }
                    (sa, sb) => Err(Error::shape(name, format!("key {sa:?} vs memory {sb:?}"))),
                }
            }
            &OpKind::Scale(c) => {
                let c = T::from_f64(c);
                Ok((s(0).to_vec(), v(0).iter().map(|&x| x * c).collect()))
            }
            OpKind::SumReduce => Ok((vec![1], vec![super::kernels::sum(v(0))])),
        }
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<T>> {
        if self.value(loss).len() != 1 {
            return Err(Error::shape("backward", format!("loss must be scalar, got {:?}", self.shape(loss))));
        }
        let mut grads: Vec<Option<Vec<T>>> = Vec::new();
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![T::one()]);
        // Weight gradients of parameter matvecs are gathered and applied row
        // by row after the sweep so each weight row is touched once.
        let mut deferred: Vec<(usize, usize, usize)> = Vec::new();
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            let Source::Op(op, inputs) = &node.source else { continue };
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            if matches!(op, OpKind::MatMul)
                && self.shape(inputs[1]).len() == 1
                && matches!(self.nodes[inputs[0].0].source, Source::Param(_))
            {
                deferred.push((inputs[0].0, idx, inputs[1].0));
                if self.nodes[inputs[1].0].requires_grad {
                    let k = self.value(inputs[1]).len();
                    let rows: Vec<&[T]> = self.value(inputs[0]).chunks_exact(k).collect();
                    axpy_many(&g, &rows, grad_slot(&mut grads, inputs[1].0, k));
                }
            } else {
                self.backprop_op(op, inputs, idx, &g, &mut grads);
            }
            grads[idx] = Some(g);
        }
        deferred.sort_by_key(|&(w, _, _)| w);
        for group in deferred.chunk_by(|a, b| a.0 == b.0) {
            let w = group[0].0;
            let k = self.value(NodeId(group[0].2)).len();
            let mut gw = grads[w].take().unwrap_or_else(|| vec![T::zero(); self.value(NodeId(w)).len()]);
            let outs: Vec<&[T]> = group.iter().map(|&(_, out, _)| grads[out].as_deref().unwrap_or(&[])).collect();
            let xs: Vec<&[T]> = group.iter().map(|&(_, _, x)| self.value(NodeId(x))).collect();
            let mut coeffs = Vec::with_capacity(group.len());
            for (i, row) in gw.chunks_exact_mut(k).enumerate() {
                coeffs.clear();
                coeffs.extend(outs.iter().map(|g| g.get(i).copied().unwrap_or(T::zero())));
                axpy_many(&coeffs, &xs, row);
            }
            grads[w] = Some(gw);
        }
        Ok(Gradients { grads })
    }

    fn backprop_op(&self, op: &OpKind, inputs: &[NodeId], idx: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let out = &self.nodes[idx].value;
        let wants = |i: usize| self.nodes[inputs[i].0].requires_grad;
        let v = |i: usize| self.value(inputs[i]);
        let s = |i: usize| self.shape(inputs[i]);
        macro_rules! grad_of {
            ($i:expr) => {
                grad_slot(grads, inputs[$i].0, self.value(inputs[$i]).len())
            };
        }
        match op {
            OpKind::MatMul => {
                let (a, b) = (v(0), v(1));
                match (s(0), s(1)) {
                    (&[_, k], &[_]) => {
                        if wants(0) {
                            let ga = grad_of!(0);
                            for (i, row) in ga.chunks_exact_mut(k).enumerate() {
                                if g[i] != T::zero() {
                                    axpy(g[i], b, row);
                                }
                            }
                        }
                        if wants(1) {
                            let gb = grad_of!(1);
                            for (i, row) in a.chunks_exact(k).enumerate() {
                                if g[i] != T::zero() {
                                    axpy(g[i], row, gb);
                                }
                            }
                        }
                    }
                    (&[m, k], &[_, n]) => {
                        if wants(0) {
                            let ga = grad_of!(0);
                            for i in 0..m {
                                for p in 0..k {
                                    ga[i * k + p] += dot(&g[i * n..(i + 1) * n], &b[p * n..(p + 1) * n]);
                                }
                            }
                        }
                        if wants(1) {
                            let gb = grad_of!(1);
                            for i in 0..m {
                                for p in 0..k {
                                    axpy(a[i * k + p], &g[i * n..(i + 1) * n], &mut gb[p * n..(p + 1) * n]);
                                }
                            }
                        }
                    }
                    _ => unreachable!("matmul shapes validated in forward"),
                }
            }
            OpKind::Add | OpKind::Sub | OpKind::Mul | OpKind::Div => {
                let (a, b) = (v(0), v(1));
                for side in 0..2 {
                    if !wants(side) {
                        continue;
                    }
                    let target = grad_of!(side);
                    let scalar_target = target.len() == 1 && g.len() > 1;
                    for i in 0..g.len() {
                        let (x, y) = (bcast(a, i), bcast(b, i));
                        let d = match (op, side) {
                            (OpKind::Add, _) => g[i],
                            (OpKind::Sub, 0) => g[i],
                            (OpKind::Sub, _) => -g[i],
                            (OpKind::Mul, 0) => g[i] * y,
                            (OpKind::Mul, _) => g[i] * x,
                            (_, 0) => g[i] / y,
                            _ => -g[i] * x / (y * y),
                        };
                        target[if scalar_target { 0 } else { i }] += d;
                    }
                }
            }
            OpKind::Concat => {
                let mut offset = 0;
                for i in 0..inputs.len() {
                    let n = v(i).len();
                    if wants(i) {
                        add_into(&g[offset..offset + n], grad_of!(i));
                    }
                    offset += n;
                }
            }
            &OpKind::Slice { start, len } => {
                if wants(0) {
                    add_into(g, &mut grad_of!(0)[start..start + len]);
                }
            }
            OpKind::Reshape(_) => {
                if wants(0) {
                    add_into(g, grad_of!(0));
                }
            }
            OpKind::Sigmoid => {
                let ga = grad_of!(0);
                for ((t, &y), &gi) in ga.iter_mut().zip(out).zip(g) {
                    *t += gi * y * (T::one() - y);
                }
            }
            OpKind::Tanh => {
                let ga = grad_of!(0);
                for ((t, &y), &gi) in ga.iter_mut().zip(out).zip(g) {
                    *t += gi * (T::one() - y * y);
                }
            }
            OpKind::Softplus => {
                let a = v(0);
                let ga = grad_of!(0);
                for ((t, &x), &gi) in ga.iter_mut().zip(a).zip(g) {
                    *t += gi * sigmoid(x);
                }
            }
            OpKind::Softmax => {
                let cols = *s(0).last().expect("non-empty shape");
                let ga = grad_of!(0);
                for ((trow, yrow), grow) in ga.chunks_exact_mut(cols).zip(out.chunks_exact(cols)).zip(g.chunks_exact(cols)) {
                    let inner = dot(yrow, grow);
                    for ((t, &y), &gi) in trow.iter_mut().zip(yrow).zip(grow) {
                        *t += y * (gi - inner);
                    }
                }
            }
            OpKind::Pow => {
                let (base, e) = (v(0), v(1)[0]);
                if wants(0) {
                    let gb = grad_of!(0);
                    for ((t, &x), &gi) in gb.iter_mut().zip(base).zip(g) {
                        if x != T::zero() {
                            *t += gi * e * x.powf(e - T::one());
                        }
                    }
                }
                if wants(1) {
                    let mut acc = T::zero();
                    for ((&x, &y), &gi) in base.iter().zip(out).zip(g) {
                        if x > T::zero() {
                            acc += gi * y * x.ln();
                        }
                    }
                    grad_of!(1)[0] += acc;
                }
            }
            OpKind::CosineSimilarity => {
                let (key, mem) = (v(0), v(1));
                let m = key.len();
                let eps = T::from_f64(COSINE_EPS);
                let kk = dot(key, key);
                let knorm = kk.sqrt();
                let mut gkey = vec![T::zero(); m];
                let mut gmem = if wants(1) { Some(grad_of!(1)) } else { None };
                for (r, row) in mem.chunks_exact(m).enumerate() {
                    let gi = g[r];
                    if gi == T::zero() {
                        continue;
                    }
                    let rr = dot(row, row);
                    let rnorm = rr.sqrt();
                    let denom = knorm * rnorm;
                    let sim = out[r];
                    if denom > eps {
                        let inv = gi / denom;
                        let kcoef = gi * sim / kk;
                        let rcoef = gi * sim / rr;
                        for j in 0..m {
                            gkey[j] += inv * row[j] - kcoef * key[j];
                        }
                        if let Some(gm) = gmem.as_deref_mut() {
                            let grow = &mut gm[r * m..(r + 1) * m];
                            for j in 0..m {
                                grow[j] += inv * key[j] - rcoef * row[j];
                            }
                        }
                    } else {
                        let inv = gi / eps;
                        axpy(inv, row, &mut gkey);
                        if let Some(gm) = gmem.as_deref_mut() {
                            axpy(inv, key, &mut gm[r * m..(r + 1) * m]);
                        }
                    }
                }
                if wants(0) {
                    add_into(&gkey, grad_of!(0));
                }
            }
            &OpKind::Scale(c) => {
                let c = T::from_f64(c);
                axpy(c, g, grad_of!(0));
            }
            OpKind::SumReduce => {
                let ga = grad_of!(0);
                for t in ga.iter_mut() {
                    *t += g[0];
                }
            }
        }
    }
}

/// Result of a reverse sweep.
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient with respect to `id`, or `None` when the loss does not
    /// depend on it (its gradient is zero).
    pub fn get(&self, id: NodeId) -> Option<&[T]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    /// Gradient for `id` with unreached nodes materialized as zeros.
    pub fn get_or_zeros(&self, graph: &Graph<'_, T>, id: NodeId) -> Vec<T> {
        match self.get(id) {
            Some(g) => g.to_vec(),
            None => vec![T::zero(); graph.value(id).len()],
        }
    }

    /// Gradients aligned with the graph's parameter set.
    pub fn param_grads(&self, graph: &Graph<'_, T>) -> ParamGrads<T> {
        let mut out = ParamGrads::zeros_like(graph.params);
        for (p, node) in graph.param_nodes.iter().enumerate() {
            if let Some(g) = node.and_then(|n| self.get(n)) {
                out.grads[p].copy_from_slice(g);
            }
        }
        out
    }
}

fn grad_slot<T: Real>(grads: &mut [Option<Vec<T>>], id: usize, len: usize) -> &mut Vec<T> {
    grads[id].get_or_insert_with(|| vec![T::zero(); len])
}

fn check_finite<T: Real>(op: &'static str, values: &[T]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical { op })
    }
}

fn broadcast_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let (na, nb): (usize, usize) = (a.iter().product(), b.iter().product());
    if a == b || nb == 1 {
        Ok(a.to_vec())
    } else if na == 1 {
        Ok(b.to_vec())
    } else {
        Err(Error::shape(op, format!("{a:?} vs {b:?}")))
    }
}

#[inline]
fn bcast<T: Copy>(x: &[T], i: usize) -> T {
    if x.len() == 1 {
        x[0]
    } else {
        x[i]
    }
}

#[inline]
pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[inline]
fn softplus<T: Real>(x: T) -> T {
    // log1p(e^x) without overflow for large x
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn softmax_in_place<T: Real>(row: &mut [T]) {
    let max = row.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    let mut total = T::zero();
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in row.iter_mut() {
        *x = *x / total;
    }
}
