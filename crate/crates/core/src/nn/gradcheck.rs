//! Central finite-difference gradient checking.
//!
//! The checker only ever calls the forward pass, so it stays independent of
//! the reverse-mode implementation it validates. The scalar objective is a
//! fixed contraction of the graph output with a probe matrix:
//! `L = sum(output * probe)`.

use rand::Rng;

use crate::mat::Mat;
use crate::nn::{LayerGraph, ParamStore};
use crate::RunRng;

/// Step used for central differences.
pub const FD_STEP: f64 = 1e-5;

fn contraction_loss(graph: &LayerGraph, store: &ParamStore, input: &Mat, probe: &Mat) -> f64 {
    let out = graph.infer(store, input);
    out.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
}

/// Compares analytic gradients against central differences for every
/// parameter of `graph` reachable through `store`.
///
/// Returns the maximum relative error observed. Relative error is
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-3)`.
pub fn max_relative_error(
    graph: &LayerGraph,
    store: &mut ParamStore,
    input: &Mat,
    rng: &mut RunRng,
) -> f64 {
    let rows = input.rows();
    let cols = graph.out_width();
    let mut probe = Mat::zeros(rows, cols);
    for v in probe.data_mut() {
        *v = rng.random_range(-1.0..1.0);
    }

    store.zero_grads();
    let (_, tape) = graph.forward(store, input).expect("forward");
    graph.backward(store, &tape, &probe).expect("backward");

    let ids: Vec<_> = store
        .names()
        .map(String::from)
        .collect::<Vec<_>>()
        .into_iter()
        .filter_map(|n| store.id(&n))
        .collect();

    let mut worst = 0.0_f64;
    for id in ids {
        let n = store.data(id).len();
        for i in 0..n {
            let analytic = store.grad(id)[i];
            let orig = store.data(id)[i];
            store.data_mut(id)[i] = orig + FD_STEP;
            let plus = contraction_loss(graph, store, input, &probe);
            store.data_mut(id)[i] = orig - FD_STEP;
            let minus = contraction_loss(graph, store, input, &probe);
            store.data_mut(id)[i] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let scale = analytic.abs().max(numeric.abs()).max(1e-3);
            worst = worst.max((analytic - numeric).abs() / scale);
        }
    }
    store.zero_grads();
    worst
}
