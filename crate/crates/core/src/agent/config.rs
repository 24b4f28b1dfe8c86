//! Agent hyper-parameters.
//!
//! Defaults are the benchmarking values: sampling budgets 100/1000 with
//! ratios 0.9 uniform / 0.01 delta / 0.09 categorical, Adam step sizes
//! 0.0005, replay period 10, batch 256, training start 1000, capacity 10^6,
//! target sync every 2000 environment steps, epsilon 0.1, discount 0.99,
//! time limit 1000 with partial-episode bootstrapping, and stream widths
//! 128/128/256 with 128-unit predictor hiddens. The desk-scale presets
//! override budgets, widths, and step counts through [`AgentConfig::set`].

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    pub m_target: usize,
    pub m_greedy: usize,
    pub rho_uniform: f64,
    pub rho_delta: f64,
    pub rho_categorical: f64,
    /// Adam step sizes for the Q parameters and the predictor parameters.
    pub lr_q: f64,
    pub lr_argmax: f64,
    /// Learn every `replay_period` environment steps.
    pub replay_period: usize,
    pub batch_size: usize,
    pub start_size: usize,
    pub capacity: usize,
    /// Copy online parameters into the targets every `target_sync`
    /// environment steps.
    pub target_sync: usize,
    pub epsilon: f64,
    pub gamma: f64,
    pub time_limit: usize,
    pub obs_embed: usize,
    pub action_embed: usize,
    pub joint_width: usize,
    pub predictor_hidden: usize,
    pub prioritized: bool,
    pub priority_exponent: f64,
    pub importance_exponent: f64,
    /// Delta-predictor perturbation sigma as a fraction of half box width.
    pub delta_sigma_frac: f64,
    /// Bins per dimension for the categorical predictor.
    pub bins: usize,
    pub use_delta: bool,
    pub use_categorical: bool,
    /// Greedy evaluation cadence (environment steps) and episode count.
    pub eval_interval: usize,
    pub eval_episodes: usize,
    /// Largest enumerable action set for action-out baselines.
    pub action_out_ceiling: u128,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            m_target: 100,
            m_greedy: 1000,
            rho_uniform: 0.9,
            rho_delta: 0.01,
            rho_categorical: 0.09,
            lr_q: 0.0005,
            lr_argmax: 0.0005,
            replay_period: 10,
            batch_size: 256,
            start_size: 1000,
            capacity: 1_000_000,
            target_sync: 2000,
            epsilon: 0.1,
            gamma: 0.99,
            time_limit: 1000,
            obs_embed: 128,
            action_embed: 128,
            joint_width: 256,
            predictor_hidden: 128,
            prioritized: true,
            priority_exponent: 0.6,
            importance_exponent: 0.2,
            delta_sigma_frac: 0.01,
            bins: 3,
            use_delta: true,
            use_categorical: true,
            eval_interval: 1000,
            eval_episodes: 10,
            action_out_ceiling: 1_000_000,
        }
    }
}

impl AgentConfig {
    /// Ratio vector for the sampling plan: uniform first, then one entry per
    /// enabled predictor (delta before categorical).
    pub fn ratios(&self) -> Vec<f64> {
        let mut r = vec![self.rho_uniform];
        if self.use_delta {
            r.push(self.rho_delta);
        }
        if self.use_categorical {
            r.push(self.rho_categorical);
        }
        r
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_target < 1 || self.m_greedy < 1 {
            return Err(Error::Config("sampling budgets must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        if !self.use_delta && self.rho_delta != 0.0 {
            return Err(Error::Config("rho_delta set but the delta predictor is disabled".into()));
        }
        if !self.use_categorical && self.rho_categorical != 0.0 {
            return Err(Error::Config(
                "rho_categorical set but the categorical predictor is disabled".into(),
            ));
        }
        let sum: f64 = self.ratios().iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("sampling ratios sum to {sum}, expected 1")));
        }
        if self.joint_width != self.obs_embed + self.action_embed {
            return Err(Error::Config(format!(
                "joint width {} must equal obs embed {} + action embed {}",
                self.joint_width, self.obs_embed, self.action_embed
            )));
        }
        for (name, v) in [
            ("replay_period", self.replay_period),
            ("batch_size", self.batch_size),
            ("start_size", self.start_size),
            ("capacity", self.capacity),
            ("target_sync", self.target_sync),
            ("time_limit", self.time_limit),
            ("obs_embed", self.obs_embed),
            ("action_embed", self.action_embed),
            ("predictor_hidden", self.predictor_hidden),
            ("eval_interval", self.eval_interval),
            ("eval_episodes", self.eval_episodes),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.bins < 2 {
            return Err(Error::Config("bins must be at least 2".into()));
        }
        Ok(())
    }

    /// Applies one `key=value` override; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::setting(key, format!("cannot parse '{value}'")))
        }
        match key {
            "m_target" => self.m_target = parse(key, value)?,
            "m_greedy" => self.m_greedy = parse(key, value)?,
            "rho_uniform" => self.rho_uniform = parse(key, value)?,
            "rho_delta" => self.rho_delta = parse(key, value)?,
            "rho_categorical" => self.rho_categorical = parse(key, value)?,
            "lr_q" => self.lr_q = parse(key, value)?,
            "lr_argmax" => self.lr_argmax = parse(key, value)?,
            "replay_period" => self.replay_period = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "start_size" => self.start_size = parse(key, value)?,
            "capacity" => self.capacity = parse(key, value)?,
            "target_sync" => self.target_sync = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "time_limit" => self.time_limit = parse(key, value)?,
            "obs_embed" => self.obs_embed = parse(key, value)?,
            "action_embed" => self.action_embed = parse(key, value)?,
            "joint_width" => self.joint_width = parse(key, value)?,
            "predictor_hidden" => self.predictor_hidden = parse(key, value)?,
            "prioritized" => self.prioritized = parse(key, value)?,
            "priority_exponent" => self.priority_exponent = parse(key, value)?,
            "importance_exponent" => self.importance_exponent = parse(key, value)?,
            "delta_sigma_frac" => self.delta_sigma_frac = parse(key, value)?,
            "bins" => self.bins = parse(key, value)?,
            "use_delta" => self.use_delta = parse(key, value)?,
            "use_categorical" => self.use_categorical = parse(key, value)?,
            "eval_interval" => self.eval_interval = parse(key, value)?,
            "eval_episodes" => self.eval_episodes = parse(key, value)?,
            "action_out_ceiling" => self.action_out_ceiling = parse(key, value)?,
            other => return Err(Error::setting(other, "unknown agent setting")),
        }
        Ok(())
    }
}
