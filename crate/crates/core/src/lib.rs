//! QMLE: Q-learning in complex action spaces without policy gradients.
//!
//! The crate implements action-value learning built on three mechanisms:
//! sampling-based approximation of the argmax over the action space, amortized
//! maximization through maximum-likelihood argmax predictors (with best-so-far
//! priors cached in the replay memory), and an action-in value network that
//! scores arbitrary `(state, action)` pairs.
//!
//! Everything is self-contained: a minimal dense-network substrate with exact
//! reverse-mode gradients ([`nn`]), samplers and MLE losses for the predictor
//! ensemble ([`predictor`]), the candidate-set/argmax machinery ([`argmax`]),
//! prioritized replay with in-place argmax amortization ([`replay`]), the full
//! agent ([`agent`]), comparison baselines ([`baselines`]), deterministic toy
//! environments ([`envs`]), and a CSV-emitting experiment harness ([`harness`]).

pub mod agent;
pub mod argmax;
pub mod baselines;
pub mod checkpoint;
pub mod envs;
pub mod error;
pub mod harness;
pub mod mat;
pub mod nn;
pub mod predictor;
pub mod replay;
pub mod space;

pub use error::{Error, Result};

/// RNG used throughout: explicit, seedable, stable across platforms.
pub type RunRng = rand_chacha::ChaCha8Rng;

/// Convenience constructor for a seeded run RNG.
pub fn rng_from_seed(seed: u64) -> RunRng {
    use rand::SeedableRng;
    RunRng::seed_from_u64(seed)
}
