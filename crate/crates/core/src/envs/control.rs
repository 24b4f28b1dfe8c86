//! Synthetic target-tracking control task.
//!
//! Each episode draws a target vector in `[-1, 1]^d`; the observation is the
//! target (plus optional distractor noise dimensions) and the per-step reward
//! is the negative mean-squared distance between action and target. Optimal
//! return is 0 for any dimensionality, and the uniform-random per-step reward
//! is -2/3, which makes the task a clean scaling study in the action
//! dimension alone.

use rand::Rng;

use crate::envs::{Env, StepResult};
use crate::space::ActionSpace;
use crate::RunRng;

#[derive(Clone, Debug)]
pub struct SyntheticControl {
    dims: usize,
    noise_dims: usize,
    horizon: usize,
    space: ActionSpace,
    target: Vec<f64>,
    noise: Vec<f64>,
    t: usize,
}

impl SyntheticControl {
    pub const DEFAULT_HORIZON: usize = 50;

    pub fn new(dims: usize, noise_dims: usize, horizon: usize) -> Self {
        assert!((1..=38).contains(&dims), "dims must be in 1..=38");
        assert!(horizon >= 1);
        SyntheticControl {
            dims,
            noise_dims,
            horizon,
            space: ActionSpace::symmetric(dims, 1.0),
            target: vec![0.0; dims],
            noise: vec![0.0; noise_dims],
            t: 0,
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Per-step reward for an action against a known target.
    pub fn reward(target: &[f64], action: &[f64]) -> f64 {
        let d = target.len() as f64;
        -target
            .iter()
            .zip(action)
            .map(|(t, a)| (a - t) * (a - t))
            .sum::<f64>()
            / d
    }

    fn observation(&self) -> Vec<f64> {
        let mut obs = self.target.clone();
        obs.extend_from_slice(&self.noise);
        obs
    }
}

impl Env for SyntheticControl {
    fn obs_dim(&self) -> usize {
        self.dims + self.noise_dims
    }

    fn action_space(&self) -> &ActionSpace {
        &self.space
    }

    fn reset(&mut self, rng: &mut RunRng) -> Vec<f64> {
        for v in &mut self.target {
            *v = rng.random_range(-1.0..1.0);
        }
        for v in &mut self.noise {
            *v = rng.random_range(-1.0..1.0);
        }
        self.t = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64], _rng: &mut RunRng) -> StepResult {
        self.t += 1;
        StepResult {
            obs: self.observation(),
            reward: Self::reward(&self.target, action),
            terminal: false,
            // Reaching the horizon is a time limit, not a terminal state.
            truncated: self.t >= self.horizon,
        }
    }

    fn clone_env(&self) -> Box<dyn Env> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    #[test]
    fn hitting_the_target_is_optimal() {
        let mut env = SyntheticControl::new(3, 0, 50);
        let mut rng = rng_from_seed(0);
        let obs = env.reset(&mut rng);
        let r = env.step(&obs, &mut rng);
        assert_eq!(r.reward, 0.0);
    }

    #[test]
    fn uniform_random_per_step_reward_is_about_minus_two_thirds() {
        // Monte-Carlo oracle: E[(a - t)^2] with a, t ~ U(-1, 1) independent
        // is 2/3 per dimension, and the reward normalizes by dimension.
        let mut rng = rng_from_seed(42);
        let d = 6;
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let mut s = 0.0;
            for _ in 0..d {
                let a: f64 = rng.random_range(-1.0..1.0);
                let t: f64 = rng.random_range(-1.0..1.0);
                s += (a - t) * (a - t);
            }
            acc += -s / d as f64;
        }
        let mean = acc / n as f64;
        assert!((mean + 2.0 / 3.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn horizon_truncates_without_terminating() {
        let mut env = SyntheticControl::new(2, 0, 3);
        let mut rng = rng_from_seed(1);
        env.reset(&mut rng);
        let a = [0.0, 0.0];
        assert!(!env.step(&a, &mut rng).truncated);
        assert!(!env.step(&a, &mut rng).truncated);
        let last = env.step(&a, &mut rng);
        assert!(last.truncated && !last.terminal);
    }
}
