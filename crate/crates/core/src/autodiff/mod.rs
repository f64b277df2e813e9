//! Define-by-run reverse-mode automatic differentiation.
//!
//! A [`Graph`] is built fresh for every episode. Parameters live outside the
//! graph in a [`ParamSet`] and are borrowed, so a large weight matrix used at
//! every time step is registered once and its gradient accumulates in a single
//! buffer.

mod adam;
mod gradcheck;
mod graph;
pub(crate) mod kernels;
mod params;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{check_gradients, GradCheck, TensorCheck, NORM_FLOOR};
pub use graph::{Gradients, Graph, NodeId, OpKind};
pub use params::{ParamGrads, ParamId, ParamSet};
pub use tensor::Tensor;
