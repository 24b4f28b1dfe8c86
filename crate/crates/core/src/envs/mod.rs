//! Deterministic, dependency-free test environments and wrappers.
//!
//! Every environment is value-semantic (clone per seed/run) and keeps its
//! stochastic elements on the caller's RNG stream. Reward surfaces used as
//! ground truth (bimodal bandit, climbing game) expose exact-evaluation hooks
//! so oracles never pass through learned networks.

mod bandit;
mod climb;
mod control;
mod registry;
mod wrap;

pub use bandit::{BimodalBandit, BimodalSurface, KArmedBandit};
pub use climb::{ClimbingGame, ClimbingPayoff};
pub use control::SyntheticControl;
pub use registry::make_env;
pub use wrap::{Discretize, TimeLimit};

use crate::space::ActionSpace;
use crate::RunRng;

/// Outcome of one environment step. `terminal` means a true terminal state
/// (bootstrap discount 0); `truncated` marks a time-limit cut where the TD
/// target still bootstraps.
#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    pub truncated: bool,
}

pub trait Env {
    fn obs_dim(&self) -> usize;
    fn action_space(&self) -> &ActionSpace;
    fn reset(&mut self, rng: &mut RunRng) -> Vec<f64>;
    fn step(&mut self, action: &[f64], rng: &mut RunRng) -> StepResult;
    fn clone_env(&self) -> Box<dyn Env>;
}

impl Clone for Box<dyn Env> {
    fn clone(&self) -> Self {
        self.clone_env()
    }
}
