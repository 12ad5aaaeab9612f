//! A small differentiable PointNet-style classifier.
//!
//! The network applies a shared dense stack to every point independently,
//! aggregates per-point features with a coordinate-wise max-pool, and feeds
//! the pooled vector through a dense head to produce class logits. The
//! attack objective `F` is the cross-entropy of the true label, and
//! [`PointClassifier::input_gradient`] returns its exact analytic gradient
//! with respect to every input coordinate.
//!
//! All linear algebra runs through fixed-order row-wise kernels, so a
//! point's features never depend on which other points share the batch.
//! That makes `forward` bit-exactly permutation invariant and lets the
//! attack loop cache the original cloud's pooled features while moving only
//! the added points.

mod io;
mod train;

pub use io::{load_weights, load_weights_from_path, save_weights, save_weights_to_path};
pub use train::{evaluate_accuracy, train, TrainConfig, TrainReport};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

/// Activation applied after a dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
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
            Activation::Identity => x,
        }
    }

    /// Subgradient; ReLU uses 0 at the kink.
    #[inline]
    fn grad(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One dense layer: `out = activation(W x + b)` with `W` stored `out × in`.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Array2<f64>, biases: Array1<f64>, activation: Activation) -> Result<Self> {
        if weights.nrows() != biases.len() {
            return Err(Error::ModelConfig(format!(
                "weight rows {} != bias length {}",
                weights.nrows(),
                biases.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) || biases.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("dense layer parameters"));
        }
        Ok(Self { weights, biases, activation })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }
}

/// The attack objective: cross-entropy of the true label, which untargeted
/// attacks maximize.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectiveKind {
    #[default]
    UntargetedCrossEntropy,
}

/// Architecture description used for seeded initialization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Hidden widths of the shared per-point stack (input is always 3).
    pub per_point_dims: Vec<usize>,
    /// Hidden widths of the head applied after max-pooling.
    pub head_dims: Vec<usize>,
    pub num_classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { per_point_dims: vec![32, 64, 128], head_dims: vec![64], num_classes: 8 }
    }
}

/// Shared-MLP + max-pool + head classifier over 3D point clouds.
#[derive(Debug, Clone)]
pub struct PointClassifier {
    pub per_point: Vec<DenseLayer>,
    pub head: Vec<DenseLayer>,
    pub num_classes: usize,
}

/// Per-point feature gradients `∂F/∂p_i`, aligned with the input ordering.
pub type InputGradient = Vec<Point3>;

/// Activations of the shared stack over a batch of points (row per point).
struct StackTrace {
    inputs: Array2<f64>,
    pres: Vec<Array2<f64>>,
    outs: Vec<Array2<f64>>,
}

impl StackTrace {
    fn features(&self) -> &Array2<f64> {
        self.outs.last().unwrap_or(&self.inputs)
    }
}

/// Activations of the head for a single pooled vector.
struct HeadTrace {
    input: Array1<f64>,
    pres: Vec<Array1<f64>>,
    outs: Vec<Array1<f64>>,
}

impl HeadTrace {
    fn logits(&self) -> &Array1<f64> {
        self.outs.last().unwrap_or(&self.input)
    }
}

/// Cached pooled features of a fixed original cloud, letting attack steps
/// re-evaluate the model while recomputing features only for added points.
#[derive(Debug, Clone)]
pub struct BaseFeatures {
    x_pooled: Array1<f64>,
    base_len: usize,
}

/// Model evaluation at `X ∪ δ` from cached base features.
#[derive(Debug, Clone)]
pub struct DeltaEval {
    pub objective: f64,
    pub logits: Array1<f64>,
    pub prediction: usize,
    /// `∂F/∂δ_j` for each added point.
    pub delta_grads: Vec<Point3>,
}

impl PointClassifier {
    pub fn new(per_point: Vec<DenseLayer>, head: Vec<DenseLayer>, num_classes: usize) -> Result<Self> {
        let model = Self { per_point, head, num_classes };
        model.validate()?;
        Ok(model)
    }

    /// Seeded He-uniform initialization of the architecture in `config`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        if config.num_classes < 2 {
            return Err(Error::ModelConfig("need at least 2 classes".into()));
        }
        let mut layer = |inp: usize, out: usize, act: Activation, rng: &mut rand_chacha::ChaCha8Rng| {
            let limit = (6.0 / inp as f64).sqrt();
            let weights = Array2::from_shape_fn((out, inp), |_| rng.random_range(-limit..limit));
            DenseLayer::new(weights, Array1::zeros(out), act)
        };
        let mut per_point = Vec::new();
        let mut in_dim = 3;
        for &d in &config.per_point_dims {
            per_point.push(layer(in_dim, d, Activation::Relu, &mut rng)?);
            in_dim = d;
        }
        let mut head = Vec::new();
        for &d in &config.head_dims {
            head.push(layer(in_dim, d, Activation::Relu, &mut rng)?);
            in_dim = d;
        }
        head.push(layer(in_dim, config.num_classes, Activation::Identity, &mut rng)?);
        Self::new(per_point, head, config.num_classes)
    }

    /// Checks the layer dimension chain: per-point input 3, head output
    /// `num_classes`.
    pub fn validate(&self) -> Result<()> {
        let mut in_dim = 3;
        for (i, layer) in self.per_point.iter().enumerate() {
            if layer.in_dim() != in_dim {
                return Err(Error::ModelConfig(format!(
                    "per-point layer {i} expects input {} but receives {in_dim}",
                    layer.in_dim()
                )));
            }
            in_dim = layer.out_dim();
        }
        for (i, layer) in self.head.iter().enumerate() {
            if layer.in_dim() != in_dim {
                return Err(Error::ModelConfig(format!(
                    "head layer {i} expects input {} but receives {in_dim}",
                    layer.in_dim()
                )));
            }
            in_dim = layer.out_dim();
        }
        if self.head.is_empty() {
            return Err(Error::ModelConfig("head must contain at least one layer".into()));
        }
        if in_dim != self.num_classes {
            return Err(Error::ModelConfig(format!(
                "head output {} != num_classes {}",
                in_dim, self.num_classes
            )));
        }
        Ok(())
    }

    /// Feature width entering the head (the pooled dimension).
    pub fn feature_dim(&self) -> usize {
        self.per_point.last().map_or(3, DenseLayer::out_dim)
    }

    /// Class logits for a cloud. Bit-exactly invariant under point
    /// permutation and duplication.
    pub fn forward(&self, cloud: &PointCloud) -> Result<Array1<f64>> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let stack = self.run_stack(&cloud.points);
        let (pooled, _) = max_pool(stack.features());
        let head = self.head_forward(pooled);
        Ok(head.logits().clone())
    }

    /// Predicted class: argmax of logits, lowest index on ties.
    pub fn predict(&self, cloud: &PointCloud) -> Result<usize> {
        Ok(argmax(self.forward(cloud)?.as_slice().unwrap()))
    }

    /// The objective `F`: cross-entropy of `label` under softmax of the
    /// logits. Non-negative; attacks maximize it.
    pub fn objective(&self, cloud: &PointCloud, label: usize) -> Result<f64> {
        self.check_label(label)?;
        let logits = self.forward(cloud)?;
        Ok(cross_entropy(logits.as_slice().unwrap(), label).0)
    }

    /// Exact analytic gradient of the objective with respect to every input
    /// coordinate. Max-pool ties credit the lowest-index achieving point.
    pub fn input_gradient(&self, cloud: &PointCloud, label: usize) -> Result<InputGradient> {
        self.check_label(label)?;
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let stack = self.run_stack(&cloud.points);
        let (pooled, argmax_rows) = max_pool(stack.features());
        let head = self.head_forward(pooled);
        let (_, dlogits) = cross_entropy(head.logits().as_slice().unwrap(), label);
        let dpooled = self.head_backward(&head, &dlogits, None);

        let mut grads = vec![Point3::ORIGIN; cloud.len()];
        let rows = scatter_rows(&dpooled, &argmax_rows, self.feature_dim());
        if let Some((row_ids, row_grads)) = rows {
            let dinputs = self.stack_backward_rows(&stack, &row_ids, row_grads, None);
            for (slot, &row) in row_ids.iter().enumerate() {
                grads[row] = Point3::new(dinputs[[slot, 0]], dinputs[[slot, 1]], dinputs[[slot, 2]]);
            }
        }
        Ok(grads)
    }

    /// Precomputes the pooled features of a fixed cloud for incremental
    /// re-evaluation with added points.
    pub fn base_features(&self, cloud: &PointCloud) -> Result<BaseFeatures> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let stack = self.run_stack(&cloud.points);
        let (x_pooled, _) = max_pool(stack.features());
        Ok(BaseFeatures { x_pooled, base_len: cloud.len() })
    }

    /// Objective, logits, and `∂F/∂δ` at `X ∪ δ`, using cached features for
    /// `X`. Bit-identical to evaluating the concatenated cloud directly:
    /// ties between an original and an added feature maximum resolve to the
    /// original (lower index), which receives the (zero, for δ) credit.
    pub fn delta_eval(&self, base: &BaseFeatures, delta: &[Point3], label: usize) -> Result<DeltaEval> {
        self.check_label(label)?;
        let feature_dim = self.feature_dim();
        if base.x_pooled.len() != feature_dim {
            return Err(Error::ModelConfig("base features do not match this model".into()));
        }
        let stack = self.run_stack(delta);
        let features = stack.features();
        // Combined pool: δ wins a feature only by strictly exceeding the
        // base maximum.
        let mut pooled = base.x_pooled.clone();
        let mut delta_argmax: Vec<Option<usize>> = vec![None; feature_dim];
        if !delta.is_empty() {
            let feat = features.as_slice().unwrap();
            for (row, chunk) in feat.chunks_exact(feature_dim).enumerate() {
                for (f, &v) in chunk.iter().enumerate() {
                    if v > pooled[f] {
                        pooled[f] = canonical_zero(v);
                        delta_argmax[f] = Some(row);
                    }
                }
            }
        }
        let head = self.head_forward(pooled);
        let logits = head.logits().clone();
        let (objective, dlogits) = cross_entropy(logits.as_slice().unwrap(), label);
        let dpooled = self.head_backward(&head, &dlogits, None);

        let mut delta_grads = vec![Point3::ORIGIN; delta.len()];
        let achieved: Vec<usize> = delta_argmax.iter().flatten().copied().collect();
        if !achieved.is_empty() {
            let argmax_rows: Vec<Option<usize>> = delta_argmax.clone();
            if let Some((row_ids, row_grads)) = scatter_rows_opt(&dpooled, &argmax_rows, feature_dim) {
                let dinputs = self.stack_backward_rows(&stack, &row_ids, row_grads, None);
                for (slot, &row) in row_ids.iter().enumerate() {
                    delta_grads[row] =
                        Point3::new(dinputs[[slot, 0]], dinputs[[slot, 1]], dinputs[[slot, 2]]);
                }
            }
        }
        let prediction = argmax(logits.as_slice().unwrap());
        Ok(DeltaEval { objective, logits, prediction, delta_grads })
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.num_classes {
            return Err(Error::InvalidLabel { label, num_classes: self.num_classes });
        }
        Ok(())
    }

    /// Runs the shared stack over a batch of points, keeping activations
    /// for backprop. Row-independent by construction.
    fn run_stack(&self, points: &[Point3]) -> StackTrace {
        let n = points.len();
        let mut inputs = Array2::zeros((n, 3));
        for (i, p) in points.iter().enumerate() {
            inputs[[i, 0]] = p.x;
            inputs[[i, 1]] = p.y;
            inputs[[i, 2]] = p.z;
        }
        let mut pres = Vec::with_capacity(self.per_point.len());
        let mut outs = Vec::with_capacity(self.per_point.len());
        let mut current = inputs.clone();
        for layer in &self.per_point {
            let pre = affine_rows(&current, layer);
            let out = pre.mapv(|v| layer.activation.apply(v));
            pres.push(pre);
            outs.push(out.clone());
            current = out;
        }
        StackTrace { inputs, pres, outs }
    }

    fn head_forward(&self, pooled: Array1<f64>) -> HeadTrace {
        let mut pres = Vec::with_capacity(self.head.len());
        let mut outs = Vec::with_capacity(self.head.len());
        let mut current = pooled.clone();
        for layer in &self.head {
            let pre = affine_vec(&current, layer);
            let out = pre.mapv(|v| layer.activation.apply(v));
            pres.push(pre);
            outs.push(out.clone());
            current = out;
        }
        HeadTrace { input: pooled, pres, outs }
    }

    /// Backprop through the head. Returns the gradient at the pooled vector;
    /// optionally accumulates parameter gradients.
    fn head_backward(
        &self,
        trace: &HeadTrace,
        dlogits: &Array1<f64>,
        mut params: Option<&mut Vec<(Array2<f64>, Array1<f64>)>>,
    ) -> Array1<f64> {
        let mut dout = dlogits.clone();
        for (idx, layer) in self.head.iter().enumerate().rev() {
            let pre = &trace.pres[idx];
            let dpre =
                Array1::from_iter(dout.iter().zip(pre.iter()).map(|(&g, &p)| g * layer.activation.grad(p)));
            let input = if idx == 0 { &trace.input } else { &trace.outs[idx - 1] };
            if let Some(grads) = params.as_deref_mut() {
                let (dw, db) = &mut grads[idx];
                for (u, &g) in dpre.iter().enumerate() {
                    if g != 0.0 {
                        let mut row = dw.row_mut(u);
                        for (j, &x) in input.iter().enumerate() {
                            row[j] += g * x;
                        }
                    }
                    db[u] += g;
                }
            }
            let mut dinput = Array1::zeros(layer.in_dim());
            let w = layer.weights.as_slice().unwrap();
            let in_dim = layer.in_dim();
            for (u, &g) in dpre.iter().enumerate() {
                if g != 0.0 {
                    let wrow = &w[u * in_dim..(u + 1) * in_dim];
                    for (j, &wv) in wrow.iter().enumerate() {
                        dinput[j] += g * wv;
                    }
                }
            }
            dout = dinput;
        }
        dout
    }

    /// Backprop through the per-point stack for a row subset. `row_grads`
    /// holds feature-space gradients (one row per entry of `rows`); returns
    /// gradients at the stack input (`|rows| × 3`). Optionally accumulates
    /// parameter gradients.
    fn stack_backward_rows(
        &self,
        trace: &StackTrace,
        rows: &[usize],
        row_grads: Array2<f64>,
        mut params: Option<&mut Vec<(Array2<f64>, Array1<f64>)>>,
    ) -> Array2<f64> {
        let mut dout = row_grads;
        for (idx, layer) in self.per_point.iter().enumerate().rev() {
            let pre = &trace.pres[idx];
            let out_dim = layer.out_dim();
            let in_dim = layer.in_dim();
            // dpre = dout ⊙ act'(pre[rows])
            let mut dpre = dout;
            {
                let dpre_s = dpre.as_slice_mut().unwrap();
                let pre_s = pre.as_slice().unwrap();
                for (slot, &row) in rows.iter().enumerate() {
                    let dst = &mut dpre_s[slot * out_dim..(slot + 1) * out_dim];
                    let src = &pre_s[row * out_dim..(row + 1) * out_dim];
                    for (d, &p) in dst.iter_mut().zip(src.iter()) {
                        *d *= layer.activation.grad(p);
                    }
                }
            }
            let input_full = if idx == 0 { &trace.inputs } else { &trace.outs[idx - 1] };
            let input_s = input_full.as_slice().unwrap();
            if let Some(grads) = params.as_deref_mut() {
                let (dw, db) = &mut grads[idx];
                let dw_s = dw.as_slice_mut().unwrap();
                let dpre_s = dpre.as_slice().unwrap();
                for (slot, &row) in rows.iter().enumerate() {
                    let g_row = &dpre_s[slot * out_dim..(slot + 1) * out_dim];
                    let x_row = &input_s[row * in_dim..(row + 1) * in_dim];
                    for (u, &g) in g_row.iter().enumerate() {
                        if g != 0.0 {
                            let dst = &mut dw_s[u * in_dim..(u + 1) * in_dim];
                            for (d, &x) in dst.iter_mut().zip(x_row.iter()) {
                                *d += g * x;
                            }
                        }
                        db[u] += g;
                    }
                }
            }
            // dinput = dpre · W
            let mut dinput = Array2::zeros((rows.len(), in_dim));
            {
                let din_s = dinput.as_slice_mut().unwrap();
                let dpre_s = dpre.as_slice().unwrap();
                let w = layer.weights.as_slice().unwrap();
                for slot in 0..rows.len() {
                    let g_row = &dpre_s[slot * out_dim..(slot + 1) * out_dim];
                    let d_row = &mut din_s[slot * in_dim..(slot + 1) * in_dim];
                    for (u, &g) in g_row.iter().enumerate() {
                        if g != 0.0 {
                            let w_row = &w[u * in_dim..(u + 1) * in_dim];
                            for (d, &wv) in d_row.iter_mut().zip(w_row.iter()) {
                                *d += g * wv;
                            }
                        }
                    }
                }
            }
            dout = dinput;
        }
        dout
    }
}

/// `activation(W x + b)` for a batch of row vectors, with a fixed-order
/// unrolled dot so each output row depends only on its own input row.
fn affine_rows(x: &Array2<f64>, layer: &DenseLayer) -> Array2<f64> {
    let (n, in_dim) = x.dim();
    let out_dim = layer.out_dim();
    debug_assert_eq!(in_dim, layer.in_dim());
    let mut out = Array2::zeros((n, out_dim));
    let xs = x.as_slice().unwrap();
    let ws = layer.weights.as_slice().unwrap();
    let os = out.as_slice_mut().unwrap();
    for row in 0..n {
        let x_row = &xs[row * in_dim..(row + 1) * in_dim];
        let o_row = &mut os[row * out_dim..(row + 1) * out_dim];
        for (u, o) in o_row.iter_mut().enumerate() {
            let w_row = &ws[u * in_dim..(u + 1) * in_dim];
            *o = dot_fixed(x_row, w_row) + layer.biases[u];
        }
    }
    out
}

fn affine_vec(x: &Array1<f64>, layer: &DenseLayer) -> Array1<f64> {
    let in_dim = layer.in_dim();
    let ws = layer.weights.as_slice().unwrap();
    let xs = x.as_slice().unwrap();
    Array1::from_iter(
        (0..layer.out_dim()).map(|u| dot_fixed(xs, &ws[u * in_dim..(u + 1) * in_dim]) + layer.biases[u]),
    )
}

/// Dot product with four fixed accumulator chains: deterministic order,
/// independent of batch shape.
#[inline]
fn dot_fixed(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Coordinate-wise max over rows. Ties keep the first (lowest-index) row;
/// `-0.0` maxima are canonicalized to `+0.0` so pooled values are bit-exact
/// under row permutation.
fn max_pool(features: &Array2<f64>) -> (Array1<f64>, Vec<usize>) {
    let (n, dim) = features.dim();
    assert!(n > 0, "max_pool over empty feature matrix");
    let fs = features.as_slice().unwrap();
    let mut pooled = fs[..dim].to_vec();
    let mut argmax = vec![0usize; dim];
    for row in 1..n {
        let r = &fs[row * dim..(row + 1) * dim];
        for (f, &v) in r.iter().enumerate() {
            if v > pooled[f] {
                pooled[f] = v;
                argmax[f] = row;
            }
        }
    }
    for v in pooled.iter_mut() {
        *v = canonical_zero(*v);
    }
    (Array1::from_vec(pooled), argmax)
}

#[inline]
fn canonical_zero(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

/// Stable cross-entropy of `label` and its gradient w.r.t. the logits.
fn cross_entropy(logits: &[f64], label: usize) -> (f64, Array1<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() + max - logits[label];
    let mut dlogits = Array1::from_iter(exps.iter().map(|&e| e / sum));
    dlogits[label] -= 1.0;
    (loss, dlogits)
}

/// Lowest-index argmax.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Groups pooled-feature gradients by achieving row: returns the sorted
/// distinct rows and a matrix of per-row feature gradients.
fn scatter_rows(dpooled: &Array1<f64>, argmax_rows: &[usize], feature_dim: usize) -> Option<(Vec<usize>, Array2<f64>)> {
    let opts: Vec<Option<usize>> = argmax_rows.iter().map(|&r| Some(r)).collect();
    scatter_rows_opt(dpooled, &opts, feature_dim)
}

fn scatter_rows_opt(
    dpooled: &Array1<f64>,
    argmax_rows: &[Option<usize>],
    feature_dim: usize,
) -> Option<(Vec<usize>, Array2<f64>)> {
    let mut row_ids: Vec<usize> = argmax_rows.iter().flatten().copied().collect();
    row_ids.sort_unstable();
    row_ids.dedup();
    if row_ids.is_empty() {
        return None;
    }
    let slot_of = |row: usize| row_ids.binary_search(&row).unwrap();
    let mut row_grads = Array2::zeros((row_ids.len(), feature_dim));
    for (f, maybe_row) in argmax_rows.iter().enumerate() {
        if let Some(row) = maybe_row {
            row_grads[[slot_of(*row), f]] += dpooled[f];
        }
    }
    Some((row_ids, row_grads))
}

/// Parameter gradients mirroring a model's layer structure.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub per_point: Vec<(Array2<f64>, Array1<f64>)>,
    pub head: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    pub fn zeros_like(model: &PointClassifier) -> Self {
        let zero = |l: &DenseLayer| {
            (Array2::zeros((l.out_dim(), l.in_dim())), Array1::zeros(l.out_dim()))
        };
        Self {
            per_point: model.per_point.iter().map(zero).collect(),
            head: model.head.iter().map(zero).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for ((w, b), (ow, ob)) in self.per_point.iter_mut().zip(&other.per_point) {
            *w += ow;
            *b += ob;
        }
        for ((w, b), (ow, ob)) in self.head.iter_mut().zip(&other.head) {
            *w += ow;
            *b += ob;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (w, b) in self.per_point.iter_mut().chain(self.head.iter_mut()) {
            w.mapv_inplace(|v| v * s);
            b.mapv_inplace(|v| v * s);
        }
    }
}

/// Loss and parameter gradients for one labeled sample.
pub(crate) fn sample_loss_and_gradients(
    model: &PointClassifier,
    cloud: &PointCloud,
    label: usize,
) -> Result<(f64, Gradients)> {
    if label >= model.num_classes {
        return Err(Error::InvalidLabel { label, num_classes: model.num_classes });
    }
    let stack = model.run_stack(&cloud.points);
    let (pooled, argmax_rows) = max_pool(stack.features());
    let head = model.head_forward(pooled);
    let (loss, dlogits) = cross_entropy(head.logits().as_slice().unwrap(), label);
    let mut grads = Gradients::zeros_like(model);
    let dpooled = model.head_backward(&head, &dlogits, Some(&mut grads.head));
    if let Some((row_ids, row_grads)) = scatter_rows(&dpooled, &argmax_rows, model.feature_dim()) {
        model.stack_backward_rows(&stack, &row_ids, row_grads, Some(&mut grads.per_point));
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_layer(dim: usize) -> DenseLayer {
        DenseLayer::new(Array2::eye(dim), Array1::zeros(dim), Activation::Identity).unwrap()
    }

    /// Per-point identity, head identity: logits = coordinate-wise max.
    fn max_model() -> PointClassifier {
        PointClassifier::new(vec![identity_layer(3)], vec![identity_layer(3)], 3).unwrap()
    }

    fn cloud(points: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(points.iter().map(|&p| Point3::from(p)).collect()).unwrap()
    }

    #[test]
    fn identity_model_logits_are_coordinate_max() {
        let m = max_model();
        let c = cloud(&[[1.0, -2.0, 0.5], [0.2, 3.0, -1.0]]);
        let logits = m.forward(&c).unwrap();
        assert_eq!(logits.as_slice().unwrap(), &[1.0, 3.0, 0.5]);
    }

    #[test]
    fn forward_permutation_invariant_bitwise() {
        let m = PointClassifier::init(&ModelConfig::default(), 3).unwrap();
        let mut pts = Vec::new();
        for i in 0..17 {
            let t = i as f64 * 0.37;
            pts.push([t.sin(), (2.0 * t).cos(), (0.5 * t).sin() - 0.2]);
        }
        let c = cloud(&pts);
        let base = m.forward(&c).unwrap();
        let mut permuted = pts.clone();
        permuted.reverse();
        permuted.swap(2, 9);
        let cp = cloud(&permuted);
        assert_eq!(m.forward(&cp).unwrap(), base);
    }

    #[test]
    fn forward_duplication_invariant() {
        let m = PointClassifier::init(&ModelConfig::default(), 4).unwrap();
        let pts = vec![[0.1, 0.4, -0.3], [-0.5, 0.2, 0.9], [0.7, -0.7, 0.0]];
        let c = cloud(&pts);
        let base = m.forward(&c).unwrap();
        let mut dup = pts.clone();
        dup.push(pts[1]);
        assert_eq!(m.forward(&cloud(&dup)).unwrap(), base);
    }

    #[test]
    fn uniform_logits_objective_is_ln_c() {
        let zero = DenseLayer::new(Array2::zeros((5, 3)), Array1::zeros(5), Activation::Identity).unwrap();
        let m = PointClassifier::new(vec![], vec![zero], 5).unwrap();
        let c = cloud(&[[0.3, 0.1, -0.2]]);
        let obj = m.objective(&c, 2).unwrap();
        assert!((obj - (5.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_logits_objective_near_zero() {
        let mut w = Array2::zeros((2, 3));
        w[[0, 0]] = 50.0;
        let strong = DenseLayer::new(w, Array1::zeros(2), Activation::Identity).unwrap();
        let m = PointClassifier::new(vec![identity_layer(3)], vec![strong], 2).unwrap();
        let c = cloud(&[[1.0, 0.0, 0.0]]);
        let obj = m.objective(&c, 0).unwrap();
        assert!(obj < 1e-12, "objective {obj} should be ~0");
    }

    #[test]
    fn objective_matches_independent_softmax_ce() {
        let m = PointClassifier::init(&ModelConfig::default(), 6).unwrap();
        let c = cloud(&[[0.2, -0.4, 0.8], [0.9, 0.1, -0.6], [-0.3, 0.5, 0.2]]);
        for label in 0..6 {
            let logits = m.forward(&c).unwrap();
            let exp_sum: f64 = logits.iter().map(|&z| z.exp()).sum();
            let want = -( (logits[label].exp() / exp_sum).ln() );
            let got = m.objective(&c, label).unwrap();
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_label_rejected() {
        let m = max_model();
        let c = cloud(&[[0.0, 0.0, 0.0]]);
        assert!(matches!(m.objective(&c, 3), Err(Error::InvalidLabel { .. })));
    }

    #[test]
    fn dead_point_has_zero_gradient() {
        let m = max_model();
        // Second point dominates every coordinate.
        let c = cloud(&[[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]);
        let g = m.input_gradient(&c, 0).unwrap();
        assert_eq!(g[0], Point3::ORIGIN);
        assert!(g[1].norm() > 0.0);
    }

    #[test]
    fn duplicated_max_point_credits_lower_index() {
        let m = max_model();
        let c = cloud(&[[1.0, 1.0, 1.0], [0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]);
        let g = m.input_gradient(&c, 0).unwrap();
        assert!(g[0].norm() > 0.0, "lowest-index copy takes the credit");
        assert_eq!(g[2], Point3::ORIGIN, "higher-index duplicate gets none");
    }

    #[test]
    fn delta_eval_matches_full_forward_bitwise() {
        let m = PointClassifier::init(&ModelConfig::default(), 5).unwrap();
        let base_pts = vec![[0.1, 0.2, 0.3], [-0.4, 0.0, 0.7], [0.6, -0.5, -0.1], [0.0, 0.9, 0.0]];
        let delta_pts = [[0.65, -0.55, -0.05], [0.15, 0.85, 0.1]];
        let base_cloud = cloud(&base_pts);
        let mut full = base_pts.clone();
        full.extend_from_slice(&delta_pts);
        let full_cloud = cloud(&full);
        let label = 1;

        let base = m.base_features(&base_cloud).unwrap();
        let delta: Vec<Point3> = delta_pts.iter().map(|&p| Point3::from(p)).collect();
        let eval = m.delta_eval(&base, &delta, label).unwrap();

        assert_eq!(eval.logits, m.forward(&full_cloud).unwrap());
        assert_eq!(eval.objective, m.objective(&full_cloud, label).unwrap());
        let full_grads = m.input_gradient(&full_cloud, label).unwrap();
        for (j, g) in eval.delta_grads.iter().enumerate() {
            assert_eq!(*g, full_grads[base_pts.len() + j]);
        }
    }

    #[test]
    fn delta_eval_tie_goes_to_original() {
        let m = max_model();
        let base_cloud = cloud(&[[1.0, 1.0, 1.0], [0.0, 0.0, 0.0]]);
        let base = m.base_features(&base_cloud).unwrap();
        // Exact copy of the dominating original point.
        let eval = m.delta_eval(&base, &[Point3::new(1.0, 1.0, 1.0)], 0).unwrap();
        assert_eq!(eval.delta_grads[0], Point3::ORIGIN);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let bad = PointClassifier::new(vec![identity_layer(3)], vec![identity_layer(4)], 4);
        assert!(matches!(bad, Err(Error::ModelConfig(_))));
    }
}
