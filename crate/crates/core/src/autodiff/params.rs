use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::Tensor;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Named, ordered collection of trainable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

impl<T: Real> Default for ParamSet<T> {
    fn default() -> Self {
        ParamSet { names: Vec::new(), tensors: Vec::new() }
    }
}

impl<T: Real> ParamSet<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor<T>) -> ParamId {
        debug_assert!(self.id(name).is_none(), "duplicate parameter {name}");
        self.names.push(name.to_string());
        self.tensors.push(tensor.with_grad(true));
        ParamId(self.tensors.len() - 1)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.tensors[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<T>> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter())
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Real>(&self) -> ParamSet<U> {
        ParamSet { names: self.names.clone(), tensors: self.tensors.iter().map(Tensor::cast).collect() }
    }

    /// Replaces every tensor with one of the same name and shape from `other`.
    pub fn assign_from(&mut self, other: &ParamSet<T>) -> Result<()> {
        self.check_layout(&other.names, |i| other.tensors[i].shape())?;
        self.tensors.clone_from(&other.tensors);
        Ok(())
    }

    pub(crate) fn check_layout<'a>(
        &self,
        names: &[String],
        shape_of: impl Fn(usize) -> &'a [usize],
    ) -> Result<()> {
        let same = names == self.names.as_slice()
            && (0..names.len()).all(|i| shape_of(i) == self.tensors[i].shape());
        if same {
            Ok(())
        } else {
            Err(Error::ParamMismatch { expected: self.names.clone(), found: names.to_vec() })
        }
    }
}

/// One gradient buffer per parameter, aligned with a [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads<T> {
    pub(crate) grads: Vec<Vec<T>>,
}

impl<T: Real> ParamGrads<T> {
    pub fn zeros_like(params: &ParamSet<T>) -> Self {
        ParamGrads { grads: params.tensors.iter().map(|t| vec![T::zero(); t.len()]).collect() }
    }

    pub fn get(&self, id: ParamId) -> &[T] {
        &self.grads[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[T]> {
        self.grads.iter().map(Vec::as_slice)
    }

    /// Elementwise sum; used to merge per-episode gradients in a fixed order.
    pub fn accumulate(&mut self, other: &ParamGrads<T>) -> Result<()> {
        if self.grads.len() != other.grads.len()
            || self.grads.iter().zip(&other.grads).any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::shape("accumulate", "gradient layouts differ"));
        }
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            super::kernels::add_into(b, a);
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.grads.iter().flatten().fold(0.0, |m, v| m.max(v.as_f64().abs()))
    }
}
