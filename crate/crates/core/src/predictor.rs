//! Parametric argmax predictors and their MLE losses.
//!
//! Each predictor is a state-conditional distribution over actions, read off
//! a shared observation embedding and trained by maximum likelihood toward
//! the best argmax approximation stored for that state. Two families are
//! supported: a delta distribution over the continuous box (sampled with
//! Gaussian perturbations around its parameter) and a factored categorical
//! over a per-dimension bin grid.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::nn::{GraphBuilder, LayerGraph, ParamStore};
use crate::space::ActionSpace;
use crate::RunRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictorFamily {
    Delta,
    FactoredCategorical,
}

/// Perturbation scale for delta-predictor sampling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PerturbSigma {
    /// Sigma expressed as a fraction of each dimension's half box width.
    HalfWidthFraction(f64),
    /// Sigma in raw action units, identical across dimensions.
    Absolute(f64),
}

impl PerturbSigma {
    fn resolve(self, space: &ActionSpace) -> Vec<f64> {
        match self {
            PerturbSigma::HalfWidthFraction(f) => {
                space.half_width().iter().map(|h| f * h).collect()
            }
            PerturbSigma::Absolute(s) => vec![s; space.dims()],
        }
    }
}

/// One member of the argmax-predictor ensemble.
#[derive(Clone, Debug)]
pub struct ArgmaxPredictor {
    family: PredictorFamily,
    graph: LayerGraph,
    prefix: String,
    sigma: Vec<f64>,
    bins: usize,
}

impl ArgmaxPredictor {
    /// Delta-family head: hidden MLP, then one tanh-bounded output per action
    /// dimension mapped onto the box.
    pub fn delta(
        store: &mut ParamStore,
        rng: &mut RunRng,
        prefix: &str,
        feat_dim: usize,
        hidden: usize,
        space: &ActionSpace,
        sigma: PerturbSigma,
    ) -> Self {
        let graph = GraphBuilder::new(store, rng, prefix, feat_dim)
            .linear("hidden", hidden)
            .relu()
            .linear("head", space.dims())
            .tanh()
            .box_map(space.low(), space.high())
            .build();
        ArgmaxPredictor {
            family: PredictorFamily::Delta,
            graph,
            prefix: prefix.to_string(),
            sigma: sigma.resolve(space),
            bins: 0,
        }
    }

    /// Factored-categorical head: hidden MLP, then `bins` logits per action
    /// dimension with an independent softmax per dimension.
    pub fn categorical(
        store: &mut ParamStore,
        rng: &mut RunRng,
        prefix: &str,
        feat_dim: usize,
        hidden: usize,
        space: &ActionSpace,
        bins: usize,
    ) -> Result<Self> {
        if bins < 2 {
            return Err(Error::Config(format!(
                "categorical predictor needs at least 2 bins, got {bins}"
            )));
        }
        let graph = GraphBuilder::new(store, rng, prefix, feat_dim)
            .linear("hidden", hidden)
            .relu()
            .linear("head", bins * space.dims())
            .softmax_groups(bins)
            .build();
        Ok(ArgmaxPredictor {
            family: PredictorFamily::FactoredCategorical,
            graph,
            prefix: prefix.to_string(),
            sigma: Vec::new(),
            bins,
        })
    }

    pub fn family(&self) -> PredictorFamily {
        self.family
    }

    pub fn param_prefix(&self) -> &str {
        &self.prefix
    }

    /// The most likely action under the predictor: the delta parameter, or
    /// the per-dimension argmax bin center.
    pub fn mode(&self, store: &ParamStore, feat: &[f64], space: &ActionSpace) -> Vec<f64> {
        let out = self.graph.infer(store, &Mat::from_row(feat));
        match self.family {
            PredictorFamily::Delta => out.row(0).to_vec(),
            PredictorFamily::FactoredCategorical => {
                let grid = space.discretized(self.bins).expect("bins validated");
                let probs = out.row(0);
                (0..space.dims())
                    .map(|d| {
                        let chunk = &probs[d * self.bins..(d + 1) * self.bins];
                        let mut best = 0;
                        for (i, &p) in chunk.iter().enumerate() {
                            if p > chunk[best] {
                                best = i;
                            }
                        }
                        grid.bin_center(d, best)
                    })
                    .collect()
            }
        }
    }

    /// Draws `n` actions conditioned on one observation embedding.
    ///
    /// Delta: the first sample is the head output itself; the remaining
    /// `n - 1` add per-coordinate Gaussian perturbations, clipped to the box
    /// (so `n >= 1`). Categorical: `n` independent per-dimension draws mapped
    /// to bin centers; duplicates are kept.
    pub fn sample(
        &self,
        store: &ParamStore,
        feat: &[f64],
        n: usize,
        space: &ActionSpace,
        rng: &mut RunRng,
    ) -> Mat {
        match self.family {
            PredictorFamily::Delta => {
                assert!(n >= 1, "delta sampling needs n >= 1");
                let head = self.graph.infer(store, &Mat::from_row(feat));
                let mu = head.row(0);
                let mut out = Mat::zeros(n, space.dims());
                out.row_mut(0).copy_from_slice(mu);
                for r in 1..n {
                    let row = out.row_mut(r);
                    for d in 0..space.dims() {
                        let s = self.sigma[d];
                        row[d] = if s > 0.0 {
                            let noise = Normal::new(0.0, s).expect("finite sigma").sample(rng);
                            mu[d] + noise
                        } else {
                            mu[d]
                        };
                    }
                    space.clamp(row);
                }
                out
            }
            PredictorFamily::FactoredCategorical => {
                let grid = space.discretized(self.bins).expect("bins validated");
                let probs_m = self.graph.infer(store, &Mat::from_row(feat));
                let probs = probs_m.row(0);
                let mut out = Mat::zeros(n, space.dims());
                for r in 0..n {
                    let row = out.row_mut(r);
                    for d in 0..space.dims() {
                        let chunk = &probs[d * self.bins..(d + 1) * self.bins];
                        let u: f64 = rng.random();
                        let mut acc = 0.0;
                        let mut idx = self.bins - 1;
                        for (i, &p) in chunk.iter().enumerate() {
                            acc += p;
                            if u < acc {
                                idx = i;
                                break;
                            }
                        }
                        row[d] = grid.bin_center(d, idx);
                    }
                }
                out
            }
        }
    }

    /// MLE loss of a batch of `(embedding, target action)` pairs, with
    /// gradients accumulated into `store`.
    ///
    /// Delta heads use squared-error regression toward the target (the
    /// fixed-variance Gaussian surrogate for a delta's degenerate
    /// likelihood); categorical heads use per-dimension cross-entropy against
    /// the nearest-bin one-hot target. Targets outside the box are clamped
    /// with a warning. Returns the mean loss over the batch.
    pub fn mle_loss(
        &self,
        store: &mut ParamStore,
        feats: &Mat,
        targets: &Mat,
        space: &ActionSpace,
    ) -> Result<f64> {
        assert_eq!(feats.rows(), targets.rows(), "batch sizes differ");
        assert_eq!(targets.cols(), space.dims(), "target dims differ");
        let mut targets = targets.clone();
        for r in 0..targets.rows() {
            let row = targets.row_mut(r);
            if !space.contains(row) {
                log::warn!("MLE target outside the action box; clamping: {row:?}");
                space.clamp(row);
            }
        }
        let batch = feats.rows() as f64;
        let dims = space.dims() as f64;
        let (out, tape) = self.graph.forward(store, feats)?;
        match self.family {
            PredictorFamily::Delta => {
                let mut loss = 0.0;
                let mut grad = Mat::zeros(out.rows(), out.cols());
                for r in 0..out.rows() {
                    let a = out.row(r);
                    let t = targets.row(r);
                    let g = grad.row_mut(r);
                    for d in 0..a.len() {
                        let diff = a[d] - t[d];
                        loss += diff * diff;
                        g[d] = 2.0 * diff / (batch * dims);
                    }
                }
                loss /= batch * dims;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss("delta MLE".into()));
                }
                self.graph.backward(store, &tape, &grad)?;
                Ok(loss)
            }
            PredictorFamily::FactoredCategorical => {
                let grid = space.discretized(self.bins).expect("bins validated");
                let mut loss = 0.0;
                let mut grad = Mat::zeros(out.rows(), out.cols());
                for r in 0..out.rows() {
                    let p = out.row(r);
                    let t = targets.row(r);
                    let g = grad.row_mut(r);
                    for d in 0..space.dims() {
                        let idx = grid.nearest_bin(d, t[d]);
                        let pt = p[d * self.bins + idx].max(1e-12);
                        loss += -pt.ln();
                        g[d * self.bins + idx] = -1.0 / (pt * batch * dims);
                    }
                }
                loss /= batch * dims;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss("categorical MLE".into()));
                }
                self.graph.backward(store, &tape, &grad)?;
                Ok(loss)
            }
        }
    }

    /// Loss without gradient accumulation (diagnostics, tests).
    pub fn mle_loss_value(&self, store: &ParamStore, feats: &Mat, targets: &Mat, space: &ActionSpace) -> f64 {
        let out = self.graph.infer(store, feats);
        let batch = feats.rows() as f64;
        let dims = space.dims() as f64;
        let mut loss = 0.0;
        match self.family {
            PredictorFamily::Delta => {
                for r in 0..out.rows() {
                    let mut t = targets.row(r).to_vec();
                    space.clamp(&mut t);
                    for (a, tv) in out.row(r).iter().zip(&t) {
                        loss += (a - tv) * (a - tv);
                    }
                }
            }
            PredictorFamily::FactoredCategorical => {
                let grid = space.discretized(self.bins).expect("bins validated");
                for r in 0..out.rows() {
                    let p = out.row(r);
                    let mut t = targets.row(r).to_vec();
                    space.clamp(&mut t);
                    for d in 0..space.dims() {
                        let idx = grid.nearest_bin(d, t[d]);
                        loss += -p[d * self.bins + idx].max(1e-12).ln();
                    }
                }
            }
        }
        loss / (batch * dims)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    fn delta_setup(sigma: PerturbSigma) -> (ParamStore, ArgmaxPredictor, ActionSpace) {
        let mut store = ParamStore::new();
        let mut rng = rng_from_seed(5);
        let space = ActionSpace::symmetric(2, 1.0);
        let pred = ArgmaxPredictor::delta(&mut store, &mut rng, "p", 4, 16, &space, sigma);
        (store, pred, space)
    }

    #[test]
    fn delta_single_sample_is_exactly_the_head_output() {
        let (store, pred, space) = delta_setup(PerturbSigma::HalfWidthFraction(0.01));
        let feat = [0.2, -0.1, 0.4, 0.0];
        let mode = pred.mode(&store, &feat, &space);
        let mut rng = rng_from_seed(9);
        let s = pred.sample(&store, &feat, 1, &space, &mut rng);
        assert_eq!(s.row(0), mode.as_slice());
    }

    #[test]
    fn delta_zero_sigma_gives_identical_copies() {
        let (store, pred, space) = delta_setup(PerturbSigma::Absolute(0.0));
        let feat = [0.0, 0.3, -0.3, 0.9];
        let mut rng = rng_from_seed(2);
        let s = pred.sample(&store, &feat, 5, &space, &mut rng);
        for r in 1..5 {
            assert_eq!(s.row(r), s.row(0));
        }
    }

    #[test]
    fn delta_samples_stay_in_box() {
        let (store, pred, space) = delta_setup(PerturbSigma::Absolute(0.5));
        let feat = [1.0, 1.0, -1.0, 0.5];
        let mut rng = rng_from_seed(4);
        let s = pred.sample(&store, &feat, 200, &space, &mut rng);
        for row in s.iter_rows() {
            assert!(space.contains(row));
        }
    }

    fn categorical_setup() -> (ParamStore, ArgmaxPredictor, ActionSpace) {
        let mut store = ParamStore::new();
        let mut rng = rng_from_seed(6);
        let space = ActionSpace::symmetric(1, 1.0);
        let pred =
            ArgmaxPredictor::categorical(&mut store, &mut rng, "c", 4, 16, &space, 3).unwrap();
        (store, pred, space)
    }

    fn zero_head(store: &mut ParamStore, prefix: &str) {
        // Forces uniform logits by zeroing the head layer.
        for name in [format!("{prefix}.head.w"), format!("{prefix}.head.b")] {
            let id = store.id(&name).unwrap();
            store.data_mut(id).fill(0.0);
        }
    }

    #[test]
    fn categorical_uniform_logits_sample_each_bin_about_equally() {
        let (mut store, pred, space) = categorical_setup();
        zero_head(&mut store, "c");
        let feat = [0.1, 0.2, 0.3, 0.4];
        let mut rng = rng_from_seed(8);
        let s = pred.sample(&store, &feat, 3000, &space, &mut rng);
        let mut counts = [0usize; 3];
        for row in s.iter_rows() {
            let idx = match row[0] {
                v if v == -1.0 => 0,
                v if v == 0.0 => 1,
                v if v == 1.0 => 2,
                v => panic!("off-grid sample {v}"),
            };
            counts[idx] += 1;
        }
        for c in counts {
            let freq = c as f64 / 3000.0;
            assert!((freq - 1.0 / 3.0).abs() < 0.05, "freq {freq}");
        }
    }

    #[test]
    fn categorical_uniform_cross_entropy_is_ln_3() {
        let (mut store, pred, space) = categorical_setup();
        zero_head(&mut store, "c");
        let feats = Mat::from_row(&[0.0, 0.0, 0.0, 0.0]);
        let targets = Mat::from_row(&[1.0]);
        let loss = pred.mle_loss_value(&store, &feats, &targets, &space);
        assert!((loss - 3.0_f64.ln()).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn delta_loss_zero_when_output_equals_target() {
        let (mut store, pred, space) = delta_setup(PerturbSigma::Absolute(0.0));
        let feats = Mat::from_row(&[0.3, 0.3, -0.2, 0.1]);
        let target = pred.mode(&store, feats.row(0), &space);
        let targets = Mat::from_row(&target);
        let loss = pred.mle_loss(&mut store, &feats, &targets, &space).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(store.grad_norm(""), 0.0);
    }

    #[test]
    fn cross_entropy_decreases_monotonically_while_fitting_one_hot() {
        let (mut store, pred, space) = categorical_setup();
        let feats = Mat::from_row(&[0.5, -0.5, 0.25, 0.0]);
        let targets = Mat::from_row(&[-1.0]);
        let mut last = f64::INFINITY;
        for _ in 0..200 {
            let loss = pred.mle_loss(&mut store, &feats, &targets, &space).unwrap();
            assert!(loss <= last + 1e-12, "loss went up: {last} -> {loss}");
            last = loss;
            store.adam_step(0.0005).unwrap();
        }
    }

    #[test]
    fn delta_loss_drives_head_to_fixed_target() {
        let (mut store, pred, space) = delta_setup(PerturbSigma::Absolute(0.0));
        let feats = Mat::from_row(&[0.1, 0.9, -0.9, 0.4]);
        let targets = Mat::from_row(&[0.7, -0.3]);
        for _ in 0..2000 {
            pred.mle_loss(&mut store, &feats, &targets, &space).unwrap();
            store.adam_step(0.0005).unwrap();
        }
        let mode = pred.mode(&store, feats.row(0), &space);
        for (m, t) in mode.iter().zip(targets.row(0)) {
            assert!((m - t).abs() < 1e-3, "mode {m} target {t}");
        }
    }

    #[test]
    fn nearest_bin_supervision_matches_hand_rule() {
        // Target 0.4 on [-1, 1] with 3 bins supervises the middle bin.
        let space = ActionSpace::symmetric(1, 1.0).discretized(3).unwrap();
        assert_eq!(space.nearest_bin(0, 0.4), 1);
    }
}
