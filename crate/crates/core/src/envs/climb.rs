//! Continuous two-agent climbing game.
//!
//! The classic 3x3 climbing payoff matrix is embedded in `[-1, 1]^2` as a sum
//! of radial bumps anchored on the grid `{-1, 0, 1}^2`. The global peak pays
//! 11, the deceptive cooperative corner pays 5, and the miscoordination
//! anchors pay -30, which is what defeats additively decomposed learners.

use crate::envs::{Env, StepResult};
use crate::space::ActionSpace;
use crate::RunRng;

/// Payoff table and bump geometry with an exact-evaluation hook.
#[derive(Clone, Debug, PartialEq)]
pub struct ClimbingPayoff {
    /// `matrix[i][j]` pays agent-1 anchor `i`, agent-2 anchor `j`, with
    /// anchors `{-1, 0, 1}` in index order.
    pub matrix: [[f64; 3]; 3],
    /// Radial bump width around each anchor.
    pub width: f64,
}

impl Default for ClimbingPayoff {
    fn default() -> Self {
        ClimbingPayoff {
            matrix: [[11.0, -30.0, 0.0], [-30.0, 7.0, 6.0], [0.0, 0.0, 5.0]],
            width: 0.25,
        }
    }
}

impl ClimbingPayoff {
    pub fn anchor(idx: usize) -> f64 {
        [-1.0, 0.0, 1.0][idx]
    }

    /// Exact joint reward at `(a1, a2)`.
    pub fn value(&self, a1: f64, a2: f64) -> f64 {
        let s2 = 2.0 * self.width * self.width;
        let mut total = 0.0;
        for (i, row) in self.matrix.iter().enumerate() {
            let d1 = a1 - Self::anchor(i);
            for (j, &pay) in row.iter().enumerate() {
                let d2 = a2 - Self::anchor(j);
                total += pay * (-(d1 * d1 + d2 * d2) / s2).exp();
            }
        }
        total
    }

    /// Anchor coordinates of the global peak.
    pub fn global_anchor(&self) -> (f64, f64) {
        let mut best = (0, 0);
        for i in 0..3 {
            for j in 0..3 {
                if self.matrix[i][j] > self.matrix[best.0][best.1] {
                    best = (i, j);
                }
            }
        }
        (Self::anchor(best.0), Self::anchor(best.1))
    }
}

/// One-step episodes; the joint action is a 2-vector, one scalar per agent.
#[derive(Clone, Debug)]
pub struct ClimbingGame {
    payoff: ClimbingPayoff,
    space: ActionSpace,
}

impl ClimbingGame {
    pub fn new(payoff: ClimbingPayoff) -> Self {
        ClimbingGame {
            payoff,
            space: ActionSpace::symmetric(2, 1.0),
        }
    }

    pub fn payoff(&self) -> &ClimbingPayoff {
        &self.payoff
    }
}

impl Default for ClimbingGame {
    fn default() -> Self {
        ClimbingGame::new(ClimbingPayoff::default())
    }
}

impl Env for ClimbingGame {
    fn obs_dim(&self) -> usize {
        1
    }

    fn action_space(&self) -> &ActionSpace {
        &self.space
    }

    fn reset(&mut self, _rng: &mut RunRng) -> Vec<f64> {
        vec![0.0]
    }

    fn step(&mut self, action: &[f64], _rng: &mut RunRng) -> StepResult {
        StepResult {
            obs: vec![0.0],
            reward: self.payoff.value(action[0], action[1]),
            terminal: true,
            truncated: false,
        }
    }

    fn clone_env(&self) -> Box<dyn Env> {
        Box::new(self.clone())
    }
}
