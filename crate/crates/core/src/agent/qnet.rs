//! Action-in Q network.
//!
//! Two input streams feed a joint head: the observation stream is a linear
//! embedding, a ReLU residual block, LayerNorm and ELU; the action stream is
//! a linear embedding, LayerNorm and ELU. Their outputs are concatenated and
//! processed by a ReLU residual block, LayerNorm, ELU, and a final linear map
//! to one scalar Q value per `(s, a)` row.
//!
//! The observation-stream output doubles as the embedding the argmax
//! predictors read. Predictor losses consume it through `obs_features`
//! (an inference pass), which is what enforces the stop-gradient boundary:
//! no predictor gradient can reach observation-stream parameters.

use crate::error::Result;
use crate::mat::Mat;
use crate::nn::{Activation, GraphBuilder, LayerGraph, ParamStore, Tape};
use crate::RunRng;

#[derive(Clone, Debug)]
pub struct QNetwork {
    obs_stream: LayerGraph,
    act_stream: LayerGraph,
    joint: LayerGraph,
}

/// Tapes of one training forward pass.
pub struct QTape {
    obs: Tape,
    act: Tape,
    joint: Tape,
    obs_cols: usize,
    rows: usize,
}

impl QNetwork {
    /// Registers all Q parameters in `store` under the `q.` prefix.
    pub fn build(
        store: &mut ParamStore,
        rng: &mut RunRng,
        obs_dim: usize,
        act_dim: usize,
        obs_embed: usize,
        action_embed: usize,
    ) -> Self {
        let obs_stream = GraphBuilder::new(store, rng, "q.obs", obs_dim)
            .linear("embed", obs_embed)
            .residual("res", Activation::Relu)
            .layer_norm("ln")
            .elu()
            .build();
        let act_stream = GraphBuilder::new(store, rng, "q.act", act_dim)
            .linear("embed", action_embed)
            .layer_norm("ln")
            .elu()
            .build();
        let joint = GraphBuilder::new(store, rng, "q.joint", obs_embed + action_embed)
            .residual("res", Activation::Relu)
            .layer_norm("ln")
            .elu()
            .linear("out", 1)
            .build();
        QNetwork {
            obs_stream,
            act_stream,
            joint,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.obs_stream.out_width()
    }

    /// Observation embeddings (inference only; this is the stop-gradient
    /// boundary the predictors read through).
    pub fn obs_features(&self, store: &ParamStore, obs: &Mat) -> Mat {
        self.obs_stream.infer(store, obs)
    }

    /// Q values for many candidate actions in one state, given the state's
    /// precomputed embedding. One batched pass through the action stream and
    /// joint head.
    pub fn q_candidates(&self, store: &ParamStore, feat: &[f64], actions: &Mat) -> Vec<f64> {
        let act_feat = self.act_stream.infer(store, actions);
        let obs_feat = Mat::tile_row(feat, actions.rows());
        let joint_in = obs_feat.hcat(&act_feat);
        let out = self.joint.infer(store, &joint_in);
        out.data().to_vec()
    }

    /// Q values for row-paired `(obs, action)` batches (inference).
    pub fn q_pairs(&self, store: &ParamStore, obs: &Mat, actions: &Mat) -> Vec<f64> {
        let obs_feat = self.obs_stream.infer(store, obs);
        let act_feat = self.act_stream.infer(store, actions);
        let out = self.joint.infer(store, &obs_feat.hcat(&act_feat));
        out.data().to_vec()
    }

    /// Training forward pass over row-paired batches, retaining tapes.
    pub fn forward_train(
        &self,
        store: &ParamStore,
        obs: &Mat,
        actions: &Mat,
    ) -> Result<(Vec<f64>, QTape)> {
        let (obs_feat, obs_tape) = self.obs_stream.forward(store, obs)?;
        let (act_feat, act_tape) = self.act_stream.forward(store, actions)?;
        let joint_in = obs_feat.hcat(&act_feat);
        let (out, joint_tape) = self.joint.forward(store, &joint_in)?;
        Ok((
            out.data().to_vec(),
            QTape {
                obs: obs_tape,
                act: act_tape,
                joint: joint_tape,
                obs_cols: obs_feat.cols(),
                rows: obs.rows(),
            },
        ))
    }

    /// Backward pass from per-row dL/dQ. Accumulates parameter gradients and
    /// returns `(d_obs_input, d_action_input)`; the action-input gradient is
    /// the `grad_a Q` a deterministic-policy actor ascends.
    pub fn backward(
        &self,
        store: &mut ParamStore,
        tape: &QTape,
        dq: &[f64],
    ) -> Result<(Mat, Mat)> {
        assert_eq!(dq.len(), tape.rows, "dq length != batch rows");
        let dq_mat = Mat::from_vec(tape.rows, 1, dq.to_vec());
        let d_joint_in = self.joint.backward(store, &tape.joint, &dq_mat)?;
        let (d_obs_feat, d_act_feat) = d_joint_in.hsplit(tape.obs_cols);
        let d_obs_in = self.obs_stream.backward(store, &tape.obs, &d_obs_feat)?;
        let d_act_in = self.act_stream.backward(store, &tape.act, &d_act_feat)?;
        Ok((d_obs_in, d_act_in))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    fn small_net() -> (ParamStore, QNetwork) {
        let mut store = ParamStore::new();
        let mut rng = rng_from_seed(3);
        let net = QNetwork::build(&mut store, &mut rng, 4, 2, 8, 8);
        (store, net)
    }

    #[test]
    fn scalar_output_per_pair_and_batch_consistency() {
        let (store, net) = small_net();
        let obs = Mat::from_row(&[0.1, -0.2, 0.3, 0.4]);
        let a1 = [0.5, -0.5];
        let a2 = [-0.1, 0.9];
        let feat = net.obs_features(&store, &obs);
        let vals = net.q_candidates(&store, feat.row(0), &Mat::from_rows(&[&a1, &a2]));
        assert_eq!(vals.len(), 2);
        // Row independence: the same pair scored alone matches its batch value.
        let solo = net.q_candidates(&store, feat.row(0), &Mat::from_row(&a2));
        assert_eq!(solo[0], vals[1]);
        // Paired evaluation agrees with candidate evaluation.
        let paired = net.q_pairs(&store, &Mat::tile_row(obs.row(0), 2), &Mat::from_rows(&[&a1, &a2]));
        assert_eq!(paired, vals);
    }

    #[test]
    fn td_gradients_flow_into_both_streams() {
        let (mut store, net) = small_net();
        let obs = Mat::from_row(&[0.1, -0.2, 0.3, 0.4]);
        let act = Mat::from_row(&[0.5, -0.5]);
        let (_, tape) = net.forward_train(&store, &obs, &act).unwrap();
        net.backward(&mut store, &tape, &[1.0]).unwrap();
        assert!(store.grad_norm("q.obs.") > 0.0);
        assert!(store.grad_norm("q.act.") > 0.0);
        assert!(store.grad_norm("q.joint.") > 0.0);
    }

    #[test]
    fn whole_network_gradient_matches_finite_differences() {
        // End-to-end check through concat and both streams: perturb every
        // parameter and compare dL/dp for L = Q(s, a).
        let (mut store, net) = small_net();
        let obs = Mat::from_row(&[0.3, 0.1, -0.6, 0.2]);
        let act = Mat::from_row(&[-0.4, 0.8]);
        let (_, tape) = net.forward_train(&store, &obs, &act).unwrap();
        net.backward(&mut store, &tape, &[1.0]).unwrap();

        let names: Vec<String> = store.names().map(String::from).collect();
        let h = 1e-5;
        let mut worst = 0.0_f64;
        for name in names {
            let id = store.id(&name).unwrap();
            for i in 0..store.data(id).len() {
                let analytic = store.grad(id)[i];
                let orig = store.data(id)[i];
                store.data_mut(id)[i] = orig + h;
                let plus = net.q_pairs(&store, &obs, &act)[0];
                store.data_mut(id)[i] = orig - h;
                let minus = net.q_pairs(&store, &obs, &act)[0];
                store.data_mut(id)[i] = orig;
                let numeric = (plus - minus) / (2.0 * h);
                let scale = analytic.abs().max(numeric.abs()).max(1e-3);
                worst = worst.max((analytic - numeric).abs() / scale);
            }
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }
}
