//! String-addressable environment registry for config files and the CLI.
//!
//! Ids:
//! - `bimodal1d`, `bimodal2d` — continuous bandits on the standard bimodal
//!   surface.
//! - `climb` — continuous two-agent climbing game.
//! - `karmed:k=<K>` — K-armed bandit with rewards evenly spread over
//!   `[0.05, 0.95]` and deterministically shuffled.
//! - `synth:d=<dims>[:disc=<bins>][:noise=<extra dims>][:horizon=<T>]` —
//!   synthetic control, optionally discretized.

use crate::envs::{
    BimodalBandit, BimodalSurface, ClimbingGame, Discretize, Env, KArmedBandit, SyntheticControl,
};
use crate::error::{Error, Result};

fn parse_kv(parts: &[&str]) -> Result<Vec<(String, String)>> {
    parts
        .iter()
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Config(format!("expected key=value, got '{p}'")))
        })
        .collect()
}

fn parse_usize(id: &str, key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("env '{id}': {key}={value} is not an integer")))
}

/// Deterministically shuffled rewards for the registry's K-armed bandit.
fn karmed_rewards(k: usize) -> Vec<f64> {
    let mut rewards: Vec<f64> = (0..k)
        .map(|i| 0.05 + 0.9 * i as f64 / (k - 1) as f64)
        .collect();
    // Fixed linear-congruential shuffle so the id alone pins the table.
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    for i in (1..k).rev() {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let j = (state >> 33) as usize % (i + 1);
        rewards.swap(i, j);
    }
    rewards
}

pub fn make_env(id: &str) -> Result<Box<dyn Env>> {
    let parts: Vec<&str> = id.split(':').collect();
    match parts[0] {
        "bimodal1d" => Ok(Box::new(BimodalBandit::new(BimodalSurface::standard(1)))),
        "bimodal2d" => Ok(Box::new(BimodalBandit::new(BimodalSurface::standard(2)))),
        "climb" => Ok(Box::new(ClimbingGame::default())),
        "karmed" => {
            let kv = parse_kv(&parts[1..])?;
            let mut k = 10usize;
            for (key, value) in &kv {
                match key.as_str() {
                    "k" => k = parse_usize(id, key, value)?,
                    _ => return Err(Error::Config(format!("env '{id}': unknown key '{key}'"))),
                }
            }
            if k < 2 {
                return Err(Error::Config(format!("env '{id}': need at least 2 arms")));
            }
            Ok(Box::new(KArmedBandit::new(karmed_rewards(k))))
        }
        "synth" => {
            let kv = parse_kv(&parts[1..])?;
            let mut dims = None;
            let mut disc = None;
            let mut noise = 0usize;
            let mut horizon = SyntheticControl::DEFAULT_HORIZON;
            for (key, value) in &kv {
                match key.as_str() {
                    "d" => dims = Some(parse_usize(id, key, value)?),
                    "disc" => disc = Some(parse_usize(id, key, value)?),
                    "noise" => noise = parse_usize(id, key, value)?,
                    "horizon" => horizon = parse_usize(id, key, value)?,
                    _ => return Err(Error::Config(format!("env '{id}': unknown key '{key}'"))),
                }
            }
            let dims = dims.ok_or_else(|| Error::Config(format!("env '{id}': missing d=")))?;
            let base: Box<dyn Env> = Box::new(SyntheticControl::new(dims, noise, horizon));
            match disc {
                None => Ok(base),
                Some(bins) => Ok(Box::new(Discretize::new(base, bins)?)),
            }
        }
        other => Err(Error::UnknownEnv(other.to_string())),
    }
}
