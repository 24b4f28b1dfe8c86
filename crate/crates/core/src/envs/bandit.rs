//! One-step bandit environments: a K-armed table bandit and continuous
//! bandits with a bimodal reward surface.

use crate::envs::{Env, StepResult};
use crate::space::ActionSpace;
use crate::RunRng;

/// K-armed bandit with deterministic rewards. Arms are presented as the K
/// bin centers of a discretized 1-D box, so action-in learners can consume
/// them directly; `Q(a) = r(a)` for every policy.
#[derive(Clone, Debug)]
pub struct KArmedBandit {
    rewards: Vec<f64>,
    space: ActionSpace,
}

impl KArmedBandit {
    pub fn new(rewards: Vec<f64>) -> Self {
        assert!(rewards.len() >= 2, "need at least 2 arms");
        let space = ActionSpace::symmetric(1, 1.0)
            .discretized(rewards.len())
            .expect("arm count validated");
        KArmedBandit { rewards, space }
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn arms(&self) -> usize {
        self.rewards.len()
    }

    /// Exact reward of an arm index.
    pub fn arm_reward(&self, arm: usize) -> f64 {
        self.rewards[arm]
    }

    pub fn optimal_arm(&self) -> usize {
        let mut best = 0;
        for (i, &r) in self.rewards.iter().enumerate() {
            if r > self.rewards[best] {
                best = i;
            }
        }
        best
    }
}

impl Env for KArmedBandit {
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
        let arm = self.space.nearest_bin(0, action[0]);
        StepResult {
            obs: vec![0.0],
            reward: self.rewards[arm],
            terminal: true,
            truncated: false,
        }
    }

    fn clone_env(&self) -> Box<dyn Env> {
        Box::new(self.clone())
    }
}

/// Two radial bumps on `[-1, 1]^d`: a narrow tall global mode and a broad
/// shallow local mode, the classic trap for gradient-following policies.
#[derive(Clone, Debug, PartialEq)]
pub struct BimodalSurface {
    pub global_center: Vec<f64>,
    pub global_amp: f64,
    pub global_width: f64,
    pub local_center: Vec<f64>,
    pub local_amp: f64,
    pub local_width: f64,
}

impl BimodalSurface {
    /// Default surface used across the bandit studies:
    /// global bump amp 1.0 / width 0.15 at 0.6 per coordinate, local bump
    /// amp 0.6 / width 0.4 at -0.5 per coordinate.
    pub fn standard(dims: usize) -> Self {
        assert!(dims == 1 || dims == 2, "surface defined for 1 or 2 dims");
        BimodalSurface {
            global_center: vec![0.6; dims],
            global_amp: 1.0,
            global_width: 0.15,
            local_center: vec![-0.5; dims],
            local_amp: 0.6,
            local_width: 0.4,
        }
    }

    pub fn dims(&self) -> usize {
        self.global_center.len()
    }

    /// Exact reward value (the ground-truth Q surface).
    pub fn value(&self, a: &[f64]) -> f64 {
        let d1: f64 = a
            .iter()
            .zip(&self.global_center)
            .map(|(x, c)| (x - c) * (x - c))
            .sum();
        let d2: f64 = a
            .iter()
            .zip(&self.local_center)
            .map(|(x, c)| (x - c) * (x - c))
            .sum();
        self.global_amp * (-d1 / (2.0 * self.global_width * self.global_width)).exp()
            + self.local_amp * (-d2 / (2.0 * self.local_width * self.local_width)).exp()
    }

    /// Exact gradient of the reward with respect to the action.
    pub fn grad(&self, a: &[f64]) -> Vec<f64> {
        let s1 = self.global_width * self.global_width;
        let s2 = self.local_width * self.local_width;
        let d1: f64 = a
            .iter()
            .zip(&self.global_center)
            .map(|(x, c)| (x - c) * (x - c))
            .sum();
        let d2: f64 = a
            .iter()
            .zip(&self.local_center)
            .map(|(x, c)| (x - c) * (x - c))
            .sum();
        let e1 = self.global_amp * (-d1 / (2.0 * s1)).exp();
        let e2 = self.local_amp * (-d2 / (2.0 * s2)).exp();
        (0..a.len())
            .map(|i| {
                -e1 * (a[i] - self.global_center[i]) / s1 - e2 * (a[i] - self.local_center[i]) / s2
            })
            .collect()
    }

    /// Exhaustive maximum over an axis-aligned grid with `points` nodes per
    /// dimension (brute-force oracle).
    pub fn grid_max(&self, points: usize) -> (Vec<f64>, f64) {
        assert!(points >= 2);
        let d = self.dims();
        let coord = |i: usize| -1.0 + 2.0 * i as f64 / (points - 1) as f64;
        let mut best_a = vec![0.0; d];
        let mut best_v = f64::NEG_INFINITY;
        match d {
            1 => {
                for i in 0..points {
                    let a = [coord(i)];
                    let v = self.value(&a);
                    if v > best_v {
                        best_v = v;
                        best_a = a.to_vec();
                    }
                }
            }
            2 => {
                for i in 0..points {
                    for j in 0..points {
                        let a = [coord(i), coord(j)];
                        let v = self.value(&a);
                        if v > best_v {
                            best_v = v;
                            best_a = a.to_vec();
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        (best_a, best_v)
    }

    /// Full grid as a candidate matrix (used for argmax exactness checks).
    pub fn grid(&self, points: usize) -> crate::mat::Mat {
        let d = self.dims();
        let coord = |i: usize| -1.0 + 2.0 * i as f64 / (points - 1) as f64;
        let rows = points.pow(d as u32);
        let mut m = crate::mat::Mat::zeros(rows, d);
        for flat in 0..rows {
            let mut rem = flat;
            let row = m.row_mut(flat);
            for dim in (0..d).rev() {
                row[dim] = coord(rem % points);
                rem /= points;
            }
        }
        m
    }
}

/// One-step continuous bandit over a bimodal surface.
#[derive(Clone, Debug)]
pub struct BimodalBandit {
    surface: BimodalSurface,
    space: ActionSpace,
}

impl BimodalBandit {
    pub fn new(surface: BimodalSurface) -> Self {
        let space = ActionSpace::symmetric(surface.dims(), 1.0);
        BimodalBandit { surface, space }
    }

    pub fn surface(&self) -> &BimodalSurface {
        &self.surface
    }
}

impl Env for BimodalBandit {
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
            reward: self.surface.value(action),
            terminal: true,
            truncated: false,
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
    fn k_armed_reward_is_the_table_value() {
        let mut env = KArmedBandit::new(vec![0.1, 0.9, 0.5]);
        assert_eq!(env.optimal_arm(), 1);
        let mut rng = rng_from_seed(0);
        env.reset(&mut rng);
        // Arm 1 of 3 sits at the box center.
        let r = env.step(&[0.0], &mut rng);
        assert_eq!(r.reward, 0.9);
        assert!(r.terminal);
    }

    #[test]
    fn global_peak_value_is_essentially_the_amplitude() {
        let s = BimodalSurface::standard(2);
        let v = s.value(&s.global_center.clone());
        assert!(v >= 0.999 * s.global_amp, "peak {v}");
    }

    #[test]
    fn local_mode_is_a_genuine_trap() {
        // Finite differences: gradient ~0 and negative-definite curvature at
        // the local center.
        let s = BimodalSurface::standard(2);
        let c = s.local_center.clone();
        let h = 1e-4;
        let g = s.grad(&c);
        for gi in &g {
            assert!(gi.abs() < 1e-6, "gradient {gi}");
        }
        for d in 0..2 {
            let mut plus = c.clone();
            let mut minus = c.clone();
            plus[d] += h;
            minus[d] -= h;
            let second = (s.value(&plus) - 2.0 * s.value(&c) + s.value(&minus)) / (h * h);
            assert!(second < 0.0, "second derivative {second}");
        }
        // Cross-check the analytic gradient against central differences away
        // from the modes.
        let a = [0.1, -0.2];
        let g = s.grad(&a);
        for d in 0..2 {
            let mut plus = a.to_vec();
            let mut minus = a.to_vec();
            plus[d] += h;
            minus[d] -= h;
            let fd = (s.value(&plus) - s.value(&minus)) / (2.0 * h);
            assert!((fd - g[d]).abs() < 1e-6, "fd {fd} analytic {}", g[d]);
        }
    }

    #[test]
    fn grid_max_lands_on_the_global_center() {
        let s = BimodalSurface::standard(2);
        let (arg, val) = s.grid_max(201);
        for (a, c) in arg.iter().zip(&s.global_center) {
            assert!((a - c).abs() <= 0.01 + 1e-12, "arg {a} center {c}");
        }
        // The cross-term from the local bump adds ~3e-4 at the global peak.
        assert!(val >= 0.999 && val <= s.global_amp + 1e-3, "val {val}");
    }
}
