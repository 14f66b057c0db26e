//! Dense arrays with a recording tape for reverse-mode differentiation.
//!
//! All model math is expressed through [`Var`] operations on a [`Graph`].
//! Arrays are row-major and generic over [`Real`] (`f32` for training,
//! `f64` for gradient checks).

mod adam;
mod array;
pub mod gradcheck;
mod graph;
pub mod ops;
mod params;
mod real;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use array::Array;
pub use graph::{Gradients, Graph, Var};
pub use ops::{Activation, Padding, PoolKind};
pub use params::{ParamSet, ParamVars};
pub use real::{DType, Real};
