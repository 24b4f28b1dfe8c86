//! Minimal dense-network substrate with exact reverse-mode gradients.
//!
//! The fixed layer set (linear, ReLU, ELU, tanh, layer norm, residual block,
//! grouped softmax, box map) is enough to realize an action-in Q network with
//! separate observation and action streams plus the argmax-predictor heads.
//! Forward passes record a tape of intermediates; `backward` replays it and
//! accumulates exact gradients into the [`ParamStore`].

mod graph;
pub mod gradcheck;
mod store;

pub use graph::{Activation, GraphBuilder, Layer, LayerGraph, Tape};
pub use store::{ParamId, ParamStore};
