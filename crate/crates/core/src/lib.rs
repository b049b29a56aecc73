//! Attention cube network (A-CubeNet) for image restoration.
//!
//! A residual CNN trunk with three attention mechanisms:
//! spatial and channel attention fused per residual unit ([`attention::adam_forward`])
//! and a hierarchical attention over group outputs ([`attention::aham_forward`]).
//! The crate carries its own reverse-mode autodiff ([`tensor`]), the
//! degradation and metric pipeline ([`imaging`]) and the training/evaluation
//! harness ([`harness`]).

pub mod attention;
pub mod error;
pub mod harness;
pub mod imaging;
pub mod model;
pub mod parallel;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Graph, ParamStore, Shape, Tensor, Var};
