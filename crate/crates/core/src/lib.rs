//! Large-deviation rate functions, small-time implied volatility smiles and
//! realised-variance densities for rough Bergomi type variance models.
//!
//! The crate is `no_std` and only needs an allocator.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bs;
pub mod density;
pub mod model;
pub mod optim;
pub mod rate;
pub mod smile;
pub mod specfun;
pub mod volterra;

pub use model::{KernelParams, Loadings, ModelError, ModelKind, ModelSpec, Modulation, Structure};
