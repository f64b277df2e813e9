//! Central finite-difference check of reverse-mode gradients.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::{Graph, NodeId, ParamSet};
use crate::{Error, Result};

/// Relative error of one parameter tensor: `|a - n| / max(|a|, |n|, floor)`
/// with Euclidean norms over the whole tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub analytic_norm: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub tensors: Vec<TensorCheck>,
}

impl GradCheck {
    pub fn max_relative_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.relative_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&TensorCheck> {
        self.tensors.iter().max_by(|a, b| a.relative_error.total_cmp(&b.relative_error))
    }
}

/// Norms below this are treated as zero gradients.
pub const NORM_FLOOR: f64 = 1e-7;

/// Differentiates `loss` with respect to every parameter in `params` and
/// compares against `(f(p + h) - f(p - h)) / 2h`, one scalar at a time.
/// `loss` must build the same computation for every parameter value.
pub fn check_gradients<F>(params: &ParamSet<f64>, step: f64, loss: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph<'_, f64>) -> Result<NodeId>,
{
    let eval = |p: &ParamSet<f64>| -> Result<f64> {
        let mut g = Graph::new(p);
        let out = loss(&mut g)?;
        match g.value(out) {
            [v] => Ok(*v),
            _ => Err(Error::shape("check_gradients", "loss must be a scalar")),
        }
    };
    let analytic = {
        let mut g = Graph::new(params);
        let out = loss(&mut g)?;
        g.backward(out)?.param_grads(&g)
    };
    let mut probe = params.clone();
    let mut tensors = Vec::new();
    for (p, (name, t)) in params.iter().enumerate() {
        let a = &analytic.grads[p];
        let mut diff2 = 0.0;
        let mut a2 = 0.0;
        let mut n2 = 0.0;
        for i in 0..t.len() {
            let id = super::ParamId(p);
            let orig = t.data()[i];
            probe.get_mut(id).data_mut()[i] = orig + step;
            let up = eval(&probe)?;
            probe.get_mut(id).data_mut()[i] = orig - step;
            let down = eval(&probe)?;
            probe.get_mut(id).data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * step);
            diff2 += (a[i] - numeric).powi(2);
            a2 += a[i].powi(2);
            n2 += numeric.powi(2);
        }
        let denom = a2.sqrt().max(n2.sqrt()).max(NORM_FLOOR);
        tensors.push(TensorCheck { name: name.into(), analytic_norm: a2.sqrt(), relative_error: diff2.sqrt() / denom });
    }
    Ok(GradCheck { tensors })
}
