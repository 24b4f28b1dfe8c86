//! Environment wrappers: per-dimension action discretization and an episode
//! time limit that truncates without terminating.

use crate::envs::{Env, StepResult};
use crate::space::ActionSpace;
use crate::RunRng;

/// Exposes the inner environment through a discretized action space. Actions
/// are snapped to the nearest bin centers before being forwarded, so agents
/// see a `bins^dims` grid without the grid ever being enumerated.
#[derive(Clone)]
pub struct Discretize {
    inner: Box<dyn Env>,
    space: ActionSpace,
}

impl Discretize {
    pub fn new(inner: Box<dyn Env>, bins: usize) -> crate::Result<Self> {
        let space = inner.action_space().discretized(bins)?;
        Ok(Discretize { inner, space })
    }
}

impl Env for Discretize {
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    fn action_space(&self) -> &ActionSpace {
        &self.space
    }

    fn reset(&mut self, rng: &mut RunRng) -> Vec<f64> {
        self.inner.reset(rng)
    }

    fn step(&mut self, action: &[f64], rng: &mut RunRng) -> StepResult {
        let mut snapped = action.to_vec();
        self.space.snap(&mut snapped);
        self.inner.step(&snapped, rng)
    }

    fn clone_env(&self) -> Box<dyn Env> {
        Box::new(self.clone())
    }
}

/// Cuts episodes after `limit` steps, flagging the cut as truncation
/// (distinct from a terminal state, so targets keep bootstrapping).
#[derive(Clone)]
pub struct TimeLimit {
    inner: Box<dyn Env>,
    limit: usize,
    t: usize,
}

impl TimeLimit {
    pub fn new(inner: Box<dyn Env>, limit: usize) -> Self {
        assert!(limit >= 1);
        TimeLimit { inner, limit, t: 0 }
    }
}

impl Env for TimeLimit {
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    fn action_space(&self) -> &ActionSpace {
        self.inner.action_space()
    }

    fn reset(&mut self, rng: &mut RunRng) -> Vec<f64> {
        self.t = 0;
        self.inner.reset(rng)
    }

    fn step(&mut self, action: &[f64], rng: &mut RunRng) -> StepResult {
        self.t += 1;
        let mut r = self.inner.step(action, rng);
        if !r.terminal && self.t >= self.limit {
            r.truncated = true;
        }
        r
    }

    fn clone_env(&self) -> Box<dyn Env> {
        Box::new(self.clone())
    }
}
