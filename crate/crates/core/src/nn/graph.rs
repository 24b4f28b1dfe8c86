//! Layer graph: ordered layer descriptors, batched forward with a gradient
//! tape, and exact reverse-mode backward.
//!
//! Graphs are sequential stacks; multi-stream networks concatenate graph
//! outputs and split the incoming gradient at the same point (see
//! `agent::qnet`). Every operation is row-wise, so batching never changes a
//! row's result.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::nn::store::{ParamId, ParamStore};
use crate::RunRng;

const LAYERNORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Elu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp() - 1.0
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed in terms of the activation output.
    #[inline]
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if y > 0.0 {
                    1.0
                } else {
                    y + 1.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Layer {
    Linear {
        w: ParamId,
        b: ParamId,
        in_dim: usize,
        out_dim: usize,
    },
    Relu,
    Elu,
    Tanh,
    LayerNorm {
        gain: ParamId,
        offset: ParamId,
        width: usize,
    },
    /// `y = x + W2 act(W1 x + b1) + b2`, output width equals input width.
    Residual {
        w1: ParamId,
        b1: ParamId,
        w2: ParamId,
        b2: ParamId,
        width: usize,
        act: Activation,
    },
    /// Independent softmax over consecutive column groups of size `group`.
    SoftmaxGroups { group: usize },
    /// Fixed affine map from `[-1, 1]` per coordinate onto an action box.
    BoxMap { center: Vec<f64>, half: Vec<f64> },
}

enum Cache {
    Input(Mat),
    Output(Mat),
    LayerNorm { xhat: Mat, inv_std: Vec<f64> },
    Residual { input: Mat, hidden: Mat },
    None,
}

/// Intermediates retained by a forward pass for the matching backward pass.
pub struct Tape {
    caches: Vec<Cache>,
    store_version: u64,
    rows: usize,
}

#[derive(Clone, Debug)]
pub struct LayerGraph {
    layers: Vec<Layer>,
    in_width: usize,
    out_width: usize,
}

impl LayerGraph {
    pub fn in_width(&self) -> usize {
        self.in_width
    }

    pub fn out_width(&self) -> usize {
        self.out_width
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Forward pass without a tape, for evaluation-only paths (candidate
    /// scoring, target networks, greedy acting).
    pub fn infer(&self, store: &ParamStore, input: &Mat) -> Mat {
        assert_eq!(
            input.cols(),
            self.in_width,
            "graph input width {} != expected {}",
            input.cols(),
            self.in_width
        );
        let mut x = input.clone();
        for layer in &self.layers {
            x = apply_layer(layer, store, &x).0;
        }
        x
    }

    /// Forward pass recording a tape for `backward`.
    pub fn forward(&self, store: &ParamStore, input: &Mat) -> Result<(Mat, Tape)> {
        if input.cols() != self.in_width {
            return Err(Error::Shape(format!(
                "graph input width {} != expected {}",
                input.cols(),
                self.in_width
            )));
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let (y, cache) = apply_layer_cached(layer, store, x);
            caches.push(cache);
            x = y;
        }
        Ok((
            x,
            Tape {
                caches,
                store_version: store.version(),
                rows: input.rows(),
            },
        ))
    }

    /// Reverse pass: accumulates parameter gradients into `store.grads` and
    /// returns the gradient with respect to the graph input.
    ///
    /// Rejects tapes recorded before the most recent parameter mutation.
    pub fn backward(&self, store: &mut ParamStore, tape: &Tape, grad_out: &Mat) -> Result<Mat> {
        if tape.store_version != store.version() {
            return Err(Error::StaleTape {
                tape: tape.store_version,
                store: store.version(),
            });
        }
        if grad_out.cols() != self.out_width || grad_out.rows() != tape.rows {
            return Err(Error::Shape(format!(
                "grad_out is {}x{}, expected {}x{}",
                grad_out.rows(),
                grad_out.cols(),
                tape.rows,
                self.out_width
            )));
        }
        let mut dy = grad_out.clone();
        for (layer, cache) in self.layers.iter().zip(&tape.caches).rev() {
            dy = backward_layer(layer, store, cache, &dy);
        }
        Ok(dy)
    }
}

fn linear_forward(store: &ParamStore, w: ParamId, b: ParamId, x: &Mat, out_dim: usize) -> Mat {
    let wd = store.data(w);
    let bd = store.data(b);
    let in_dim = x.cols();
    let mut y = Mat::zeros(x.rows(), out_dim);
    for r in 0..x.rows() {
        let xr = x.row(r);
        let yr = y.row_mut(r);
        for o in 0..out_dim {
            let wrow = &wd[o * in_dim..(o + 1) * in_dim];
            let mut acc = bd[o];
            for i in 0..in_dim {
                acc += wrow[i] * xr[i];
            }
            yr[o] = acc;
        }
    }
    y
}

fn linear_backward(
    store: &mut ParamStore,
    w: ParamId,
    b: ParamId,
    x: &Mat,
    dy: &Mat,
) -> Mat {
    let in_dim = x.cols();
    let out_dim = dy.cols();
    let mut dx = Mat::zeros(x.rows(), in_dim);
    {
        let wd = store.data(w);
        for r in 0..x.rows() {
            let dyr = dy.row(r);
            let dxr = dx.row_mut(r);
            for o in 0..out_dim {
                let g = dyr[o];
                if g == 0.0 {
                    continue;
                }
                let wrow = &wd[o * in_dim..(o + 1) * in_dim];
                for i in 0..in_dim {
                    dxr[i] += g * wrow[i];
                }
            }
        }
    }
    {
        let gw = store.grad_mut(w);
        for r in 0..x.rows() {
            let xr = x.row(r);
            let dyr = dy.row(r);
            for o in 0..out_dim {
                let g = dyr[o];
                if g == 0.0 {
                    continue;
                }
                let grow = &mut gw[o * in_dim..(o + 1) * in_dim];
                for i in 0..in_dim {
                    grow[i] += g * xr[i];
                }
            }
        }
    }
    {
        let gb = store.grad_mut(b);
        for r in 0..dy.rows() {
            let dyr = dy.row(r);
            for o in 0..out_dim {
                gb[o] += dyr[o];
            }
        }
    }
    dx
}

fn layernorm_forward(store: &ParamStore, gain: ParamId, offset: ParamId, x: &Mat) -> (Mat, Mat, Vec<f64>) {
    let g = store.data(gain);
    let b = store.data(offset);
    let w = x.cols();
    let mut xhat = Mat::zeros(x.rows(), w);
    let mut y = Mat::zeros(x.rows(), w);
    let mut inv_std = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let xr = x.row(r);
        let mean = xr.iter().sum::<f64>() / w as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / w as f64;
        let istd = 1.0 / (var + LAYERNORM_EPS).sqrt();
        inv_std.push(istd);
        let xh = xhat.row_mut(r);
        let yr = y.row_mut(r);
        for i in 0..w {
            xh[i] = (xr[i] - mean) * istd;
            yr[i] = g[i] * xh[i] + b[i];
        }
    }
    (y, xhat, inv_std)
}

fn apply_layer(layer: &Layer, store: &ParamStore, x: &Mat) -> (Mat, ()) {
    let y = match layer {
        Layer::Linear { w, b, out_dim, .. } => linear_forward(store, *w, *b, x, *out_dim),
        Layer::Relu => map_mat(x, |v| Activation::Relu.apply(v)),
        Layer::Elu => map_mat(x, |v| Activation::Elu.apply(v)),
        Layer::Tanh => map_mat(x, |v| Activation::Tanh.apply(v)),
        Layer::LayerNorm { gain, offset, .. } => layernorm_forward(store, *gain, *offset, x).0,
        Layer::Residual { w1, b1, w2, b2, width, act } => {
            let h = linear_forward(store, *w1, *b1, x, *width);
            let a = map_mat(&h, |v| act.apply(v));
            let mut y = linear_forward(store, *w2, *b2, &a, *width);
            for (yv, xv) in y.data_mut().iter_mut().zip(x.data()) {
                *yv += xv;
            }
            y
        }
        Layer::SoftmaxGroups { group } => softmax_groups(x, *group),
        Layer::BoxMap { center, half } => box_map(x, center, half),
    };
    (y, ())
}

fn apply_layer_cached(layer: &Layer, store: &ParamStore, x: Mat) -> (Mat, Cache) {
    match layer {
        Layer::Linear { w, b, out_dim, .. } => {
            let y = linear_forward(store, *w, *b, &x, *out_dim);
            (y, Cache::Input(x))
        }
        Layer::Relu => {
            let y = map_mat(&x, |v| Activation::Relu.apply(v));
            (y.clone(), Cache::Output(y))
        }
        Layer::Elu => {
            let y = map_mat(&x, |v| Activation::Elu.apply(v));
            (y.clone(), Cache::Output(y))
        }
        Layer::Tanh => {
            let y = map_mat(&x, |v| Activation::Tanh.apply(v));
            (y.clone(), Cache::Output(y))
        }
        Layer::LayerNorm { gain, offset, .. } => {
            let (y, xhat, inv_std) = layernorm_forward(store, *gain, *offset, &x);
            (y, Cache::LayerNorm { xhat, inv_std })
        }
        Layer::Residual { w1, b1, w2, b2, width, act } => {
            let h = linear_forward(store, *w1, *b1, &x, *width);
            let a = map_mat(&h, |v| act.apply(v));
            let mut y = linear_forward(store, *w2, *b2, &a, *width);
            for (yv, xv) in y.data_mut().iter_mut().zip(x.data()) {
                *yv += xv;
            }
            (y, Cache::Residual { input: x, hidden: a })
        }
        Layer::SoftmaxGroups { group } => {
            let y = softmax_groups(&x, *group);
            (y.clone(), Cache::Output(y))
        }
        Layer::BoxMap { center, half } => {
            let y = box_map(&x, center, half);
            (y, Cache::None)
        }
    }
}

fn backward_layer(layer: &Layer, store: &mut ParamStore, cache: &Cache, dy: &Mat) -> Mat {
    match (layer, cache) {
        (Layer::Linear { w, b, .. }, Cache::Input(x)) => linear_backward(store, *w, *b, x, dy),
        (Layer::Relu, Cache::Output(y)) => elementwise_grad(dy, y, Activation::Relu),
        (Layer::Elu, Cache::Output(y)) => elementwise_grad(dy, y, Activation::Elu),
        (Layer::Tanh, Cache::Output(y)) => elementwise_grad(dy, y, Activation::Tanh),
        (Layer::LayerNorm { gain, offset, width }, Cache::LayerNorm { xhat, inv_std }) => {
            let w = *width;
            let mut dx = Mat::zeros(dy.rows(), w);
            {
                let gg = store.grad_mut(*gain);
                for r in 0..dy.rows() {
                    let dyr = dy.row(r);
                    let xh = xhat.row(r);
                    for i in 0..w {
                        gg[i] += dyr[i] * xh[i];
                    }
                }
            }
            {
                let gb = store.grad_mut(*offset);
                for r in 0..dy.rows() {
                    let dyr = dy.row(r);
                    for i in 0..w {
                        gb[i] += dyr[i];
                    }
                }
            }
            let g = store.data(*gain).to_vec();
            for r in 0..dy.rows() {
                let dyr = dy.row(r);
                let xh = xhat.row(r);
                let istd = inv_std[r];
                let mut mean_dxh = 0.0;
                let mut mean_dxh_xhat = 0.0;
                for i in 0..w {
                    let dxh = dyr[i] * g[i];
                    mean_dxh += dxh;
                    mean_dxh_xhat += dxh * xh[i];
                }
                mean_dxh /= w as f64;
                mean_dxh_xhat /= w as f64;
                let dxr = dx.row_mut(r);
                for i in 0..w {
                    let dxh = dyr[i] * g[i];
                    dxr[i] = istd * (dxh - mean_dxh - xh[i] * mean_dxh_xhat);
                }
            }
            dx
        }
        (Layer::Residual { w1, b1, w2, b2, act, .. }, Cache::Residual { input, hidden }) => {
            // Skip path.
            let mut dx = dy.clone();
            // dW2, db2 and gradient into the hidden activation.
            let da = linear_backward(store, *w2, *b2, hidden, dy);
            let dh = elementwise_grad(&da, hidden, *act);
            // dW1, db1 and gradient into the block input.
            let dx_chain = linear_backward(store, *w1, *b1, input, &dh);
            for (a, b) in dx.data_mut().iter_mut().zip(dx_chain.data()) {
                *a += b;
            }
            dx
        }
        (Layer::SoftmaxGroups { group }, Cache::Output(p)) => {
            let g = *group;
            let mut dx = Mat::zeros(dy.rows(), dy.cols());
            for r in 0..dy.rows() {
                let pr = p.row(r);
                let dyr = dy.row(r);
                let dxr = dx.row_mut(r);
                for start in (0..dy.cols()).step_by(g) {
                    let mut s = 0.0;
                    for j in start..start + g {
                        s += dyr[j] * pr[j];
                    }
                    for j in start..start + g {
                        dxr[j] = pr[j] * (dyr[j] - s);
                    }
                }
            }
            dx
        }
        (Layer::BoxMap { half, .. }, Cache::None) => {
            let mut dx = dy.clone();
            for r in 0..dx.rows() {
                let row = dx.row_mut(r);
                for (v, h) in row.iter_mut().zip(half) {
                    *v *= h;
                }
            }
            dx
        }
        _ => unreachable!("layer/cache mismatch"),
    }
}

fn map_mat(x: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let mut y = x.clone();
    for v in y.data_mut() {
        *v = f(*v);
    }
    y
}

fn elementwise_grad(dy: &Mat, y: &Mat, act: Activation) -> Mat {
    let mut dx = dy.clone();
    for (d, &o) in dx.data_mut().iter_mut().zip(y.data()) {
        *d *= act.grad_from_output(o);
    }
    dx
}

fn softmax_groups(x: &Mat, group: usize) -> Mat {
    assert!(group >= 1 && x.cols() % group == 0, "softmax group mismatch");
    let mut y = x.clone();
    for r in 0..y.rows() {
        let row = y.row_mut(r);
        for start in (0..row.len()).step_by(group) {
            let chunk = &mut row[start..start + group];
            let max = chunk.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in chunk.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in chunk.iter_mut() {
                *v /= sum;
            }
        }
    }
    y
}

fn box_map(x: &Mat, center: &[f64], half: &[f64]) -> Mat {
    let mut y = x.clone();
    for r in 0..y.rows() {
        let row = y.row_mut(r);
        for i in 0..row.len() {
            row[i] = center[i] + half[i] * row[i];
        }
    }
    y
}

/// Builds a sequential graph while registering its parameters in a store.
///
/// Widths are tracked as layers are appended, so incompatible stacks fail at
/// construction time rather than in `forward`.
pub struct GraphBuilder<'a> {
    store: &'a mut ParamStore,
    rng: &'a mut RunRng,
    prefix: String,
    in_width: usize,
    width: usize,
    layers: Vec<Layer>,
}

impl<'a> GraphBuilder<'a> {
    pub fn new(store: &'a mut ParamStore, rng: &'a mut RunRng, prefix: &str, in_width: usize) -> Self {
        assert!(in_width > 0, "graph input width must be positive");
        GraphBuilder {
            store,
            rng,
            prefix: prefix.to_string(),
            in_width,
            width: in_width,
            layers: Vec::new(),
        }
    }

    fn init_linear(&mut self, name: &str, in_dim: usize, out_dim: usize) -> (ParamId, ParamId) {
        // Uniform fan-in scaling: bound = 1 / sqrt(fan_in), biases included.
        let bound = 1.0 / (in_dim as f64).sqrt();
        let w_data: Vec<f64> = (0..in_dim * out_dim)
            .map(|_| self.rng.random_range(-bound..bound))
            .collect();
        let b_data: Vec<f64> = (0..out_dim)
            .map(|_| self.rng.random_range(-bound..bound))
            .collect();
        let w = self
            .store
            .insert(&format!("{}.{}.w", self.prefix, name), out_dim, in_dim, w_data);
        let b = self
            .store
            .insert(&format!("{}.{}.b", self.prefix, name), 1, out_dim, b_data);
        (w, b)
    }

    pub fn linear(mut self, name: &str, out_dim: usize) -> Self {
        assert!(out_dim > 0, "linear output width must be positive");
        let in_dim = self.width;
        let (w, b) = self.init_linear(name, in_dim, out_dim);
        self.layers.push(Layer::Linear { w, b, in_dim, out_dim });
        self.width = out_dim;
        self
    }

    pub fn relu(mut self) -> Self {
        self.layers.push(Layer::Relu);
        self
    }

    pub fn elu(mut self) -> Self {
        self.layers.push(Layer::Elu);
        self
    }

    pub fn tanh(mut self) -> Self {
        self.layers.push(Layer::Tanh);
        self
    }

    pub fn layer_norm(mut self, name: &str) -> Self {
        let w = self.width;
        let gain = self
            .store
            .insert(&format!("{}.{}.g", self.prefix, name), 1, w, vec![1.0; w]);
        let offset = self
            .store
            .insert(&format!("{}.{}.b", self.prefix, name), 1, w, vec![0.0; w]);
        self.layers.push(Layer::LayerNorm { gain, offset, width: w });
        self
    }

    pub fn residual(mut self, name: &str, act: Activation) -> Self {
        let w = self.width;
        let (w1, b1) = self.init_linear(&format!("{name}.l1"), w, w);
        let (w2, b2) = self.init_linear(&format!("{name}.l2"), w, w);
        self.layers.push(Layer::Residual { w1, b1, w2, b2, width: w, act });
        self
    }

    pub fn softmax_groups(mut self, group: usize) -> Self {
        assert!(
            group >= 2 && self.width % group == 0,
            "softmax group {} incompatible with width {}",
            group,
            self.width
        );
        self.layers.push(Layer::SoftmaxGroups { group });
        self
    }

    /// Maps a `[-1, 1]` output (e.g. post-tanh) onto the given box.
    pub fn box_map(mut self, low: &[f64], high: &[f64]) -> Self {
        assert_eq!(low.len(), self.width, "box dims incompatible with width");
        let center: Vec<f64> = low.iter().zip(high).map(|(l, h)| 0.5 * (l + h)).collect();
        let half: Vec<f64> = low.iter().zip(high).map(|(l, h)| 0.5 * (h - l)).collect();
        self.layers.push(Layer::BoxMap { center, half });
        self
    }

    pub fn build(self) -> LayerGraph {
        LayerGraph {
            layers: self.layers,
            in_width: self.in_width,
            out_width: self.width,
        }
    }
}
