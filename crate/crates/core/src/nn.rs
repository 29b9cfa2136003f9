//! MLP and GCN binary classifiers with hand-written backpropagation.
//!
//! Both architectures are stacks of [`Dense`] layers; the GCN multiplies each
//! layer input by the normalized adjacency `Â = D^-1/2 (A + I) D^-1/2` first.
//! Hidden layers use ReLU (with `ReLU'(0) = 0`) and inverted dropout, and the
//! output is a single logit trained with BCE-with-logits. Weight decay is a
//! coupled L2 term `(wd / 2)·‖θ‖²` over every parameter, biases included.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::balance::{BalanceError, BatchSampler, LabeledSamples, SamplerParams};
use crate::contractize::ContractDataset;
use crate::eval;
use crate::matrix::Matrix;
use crate::topo::{NormStat, FEATURE_DIM};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty input")]
    Empty,
    #[error("training data must contain both classes")]
    MissingClass,
    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },
    #[error("feature order version mismatch: model {model:?}, input {input:?}")]
    VersionMismatch { model: String, input: String },
    #[error("input features were not normalized with the model's statistics")]
    NormMismatch,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Sampling(#[from] BalanceError),
    #[error("model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `in × out`, row-major.
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self { w: Matrix::zeros(fan_in, fan_out), b: vec![0.0; fan_out] }
    }

    /// Weights and biases uniform in `±1/√fan_in`.
    pub fn uniform(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let w = (0..fan_in * fan_out).map(|_| rng.gen_range(-bound..bound)).collect();
        let b = (0..fan_out).map(|_| rng.gen_range(-bound..bound)).collect();
        Self { w: Matrix::from_vec(fan_in, fan_out, w), b }
    }

    pub fn fan_in(&self) -> usize {
        self.w.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.w.cols()
    }
}

/// Layer widths `[input, hidden × (layers − 1), 1]`.
pub fn layer_widths(input: usize, hidden: usize, layers: usize) -> Vec<usize> {
    let mut widths = vec![input];
    widths.extend(std::iter::repeat_n(hidden, layers.saturating_sub(1)));
    widths.push(1);
    widths
}

pub fn init_layers(widths: &[usize], rng: &mut impl Rng) -> Vec<Dense> {
    widths.windows(2).map(|w| Dense::uniform(w[0], w[1], rng)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Dense>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnParams {
    pub layers: Vec<Dense>,
}

pub fn flatten(layers: &[Dense]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend_from_slice(l.w.data());
        out.extend_from_slice(&l.b);
    }
    out
}

pub fn unflatten(layers: &mut [Dense], values: &[f64]) {
    let mut at = 0;
    for l in layers.iter_mut() {
        let n = l.w.data().len();
        l.w.data_mut().copy_from_slice(&values[at..at + n]);
        at += n;
        let m = l.b.len();
        l.b.copy_from_slice(&values[at..at + m]);
        at += m;
    }
    assert_eq!(at, values.len(), "parameter vector length");
}

/// Symmetric-normalized adjacency with self-loops, stored as CSR.
#[derive(Debug, Clone, PartialEq)]
pub struct NormAdjacency {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl NormAdjacency {
    pub fn identity(n: usize) -> Self {
        gcn_normalize_adjacency(&[], n)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.vals[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m.set(i, self.cols[k], self.vals[k]);
            }
        }
        m
    }

    /// `Â · m`
    pub fn matmul(&self, m: &Matrix) -> Matrix {
        assert_eq!(self.n, m.rows(), "adjacency/feature row mismatch");
        let mut out = Matrix::zeros(self.n, m.cols());
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = self.vals[k];
                let src = m.row(self.cols[k]);
                for (o, x) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * x;
                }
            }
        }
        out
    }
}

/// Binarizes the undirected `edges` over `n` nodes, adds self-loops and
/// returns `D^-1/2 (A + I) D^-1/2`. Self-edges and duplicates in the input
/// are ignored.
pub fn gcn_normalize_adjacency(edges: &[(usize, usize)], n: usize) -> NormAdjacency {
    let mut nbrs: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
    for &(a, b) in edges {
        assert!(a < n && b < n, "edge ({a}, {b}) out of range for {n} nodes");
        nbrs[a].insert(b);
        nbrs[b].insert(a);
    }
    let inv_sqrt: Vec<f64> = nbrs.iter().map(|s| 1.0 / (s.len() as f64).sqrt()).collect();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for (i, s) in nbrs.iter().enumerate() {
        for &j in s {
            cols.push(j);
            vals.push(inv_sqrt[i] * inv_sqrt[j]);
        }
        row_ptr.push(cols.len());
    }
    NormAdjacency { n, row_ptr, cols, vals }
}

pub fn dataset_adjacency(ds: &ContractDataset) -> NormAdjacency {
    let edges: Vec<(usize, usize)> = ds.edges.iter().map(|e| (e.a, e.b)).collect();
    gcn_normalize_adjacency(&edges, ds.len())
}

/// Inverted-dropout mask: each entry is `1/(1−p)` with probability `1−p`, else 0.
pub fn dropout_mask(rng: &mut impl Rng, rows: usize, cols: usize, p: f64) -> Matrix {
    let keep = 1.0 / (1.0 - p);
    let data = (0..rows * cols).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect();
    Matrix::from_vec(rows, cols, data)
}

/// One mask per hidden layer for a forward pass over `rows` nodes.
pub fn hidden_masks(layers: &[Dense], rows: usize, p: f64, rng: &mut impl Rng) -> Vec<Matrix> {
    layers[..layers.len() - 1].iter().map(|l| dropout_mask(rng, rows, l.fan_out(), p)).collect()
}

struct Cache {
    /// Input to each layer's weight product (`H` or `Â·H`).
    inputs: Vec<Matrix>,
    /// Hidden pre-activations.
    pre: Vec<Matrix>,
}

fn check_shapes(
    layers: &[Dense],
    x: &Matrix,
    adj: Option<&NormAdjacency>,
    masks: Option<&[Matrix]>,
) -> Result<(), NnError> {
    if layers.is_empty() {
        return Err(NnError::Shape("model has no layers".into()));
    }
    if x.cols() != layers[0].fan_in() {
        return Err(NnError::Shape(format!("input has {} columns, model expects {}", x.cols(), layers[0].fan_in())));
    }
    for (i, pair) in layers.windows(2).enumerate() {
        if pair[0].fan_out() != pair[1].fan_in() || pair[0].b.len() != pair[0].fan_out() {
            return Err(NnError::Shape(format!("layer {i} output does not match layer {} input", i + 1)));
        }
    }
    if layers[layers.len() - 1].fan_out() != 1 {
        return Err(NnError::Shape("output layer must have width 1".into()));
    }
    if let Some(a) = adj {
        if a.len() != x.rows() {
            return Err(NnError::Shape(format!(
                "adjacency is {}×{}, features have {} rows",
                a.len(),
                a.len(),
                x.rows()
            )));
        }
    }
    if let Some(m) = masks {
        if m.len() != layers.len() - 1 {
            return Err(NnError::Shape(format!("expected {} dropout masks, got {}", layers.len() - 1, m.len())));
        }
        for (l, mask) in m.iter().enumerate() {
            if mask.shape() != (x.rows(), layers[l].fan_out()) {
                return Err(NnError::Shape(format!("dropout mask {l} has shape {:?}", mask.shape())));
            }
        }
    }
    Ok(())
}

fn forward(layers: &[Dense], x: &Matrix, adj: Option<&NormAdjacency>, masks: Option<&[Matrix]>) -> (Matrix, Cache) {
    let mut cache = Cache { inputs: Vec::with_capacity(layers.len()), pre: Vec::with_capacity(layers.len()) };
    let mut h = x.clone();
    let last = layers.len() - 1;
    for (l, layer) in layers.iter().enumerate() {
        let p = match adj {
            Some(a) => a.matmul(&h),
            None => h,
        };
        let mut z = p.matmul(&layer.w);
        z.add_row_vector(&layer.b);
        cache.inputs.push(p);
        if l == last {
            return (z, cache);
        }
        let mut act = z.clone();
        act.map_inplace(|v| v.max(0.0));
        if let Some(m) = masks {
            for (a, k) in act.data_mut().iter_mut().zip(m[l].data()) {
                *a *= k;
            }
        }
        cache.pre.push(z);
        h = act;
    }
    unreachable!("layers is nonempty")
}

fn backward_from(
    layers: &[Dense],
    adj: Option<&NormAdjacency>,
    masks: Option<&[Matrix]>,
    cache: &Cache,
    dlogits: Matrix,
) -> Vec<Dense> {
    let mut grads: Vec<Dense> = layers.iter().map(|l| Dense::zeros(l.fan_in(), l.fan_out())).collect();
    let mut dz = dlogits;
    for l in (0..layers.len()).rev() {
        grads[l].w = cache.inputs[l].t_matmul(&dz);
        grads[l].b = dz.column_sums();
        if l == 0 {
            break;
        }
        let dp = dz.matmul_t(&layers[l].w);
        let mut dh = match adj {
            // Â is symmetric, so Âᵀ·dP = Â·dP.
            Some(a) => a.matmul(&dp),
            None => dp,
        };
        if let Some(m) = masks {
            for (g, k) in dh.data_mut().iter_mut().zip(m[l - 1].data()) {
                *g *= k;
            }
        }
        for (g, z) in dh.data_mut().iter_mut().zip(cache.pre[l - 1].data()) {
            if *z <= 0.0 {
                *g = 0.0;
            }
        }
        dz = dh;
    }
    grads
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `softplus(z) − y·z`, stable for large `|z|`.
fn bce_term(z: f64, y: u8) -> f64 {
    z.max(0.0) - f64::from(y) * z + (-z.abs()).exp().ln_1p()
}

/// Mean binary cross-entropy on logits.
pub fn bce_loss(logits: &[f64], labels: &[u8]) -> Result<f64, NnError> {
    if logits.is_empty() {
        return Err(NnError::Empty);
    }
    if logits.len() != labels.len() {
        return Err(NnError::Shape(format!("{} logits vs {} labels", logits.len(), labels.len())));
    }
    Ok(logits.iter().zip(labels).map(|(&z, &y)| bce_term(z, y)).sum::<f64>() / logits.len() as f64)
}

/// `(wd / 2)·‖θ‖²`
pub fn l2_penalty(layers: &[Dense], weight_decay: f64) -> f64 {
    0.5 * weight_decay * flatten(layers).iter().map(|x| x * x).sum::<f64>()
}

fn add_l2_grad(grads: &mut [Dense], layers: &[Dense], weight_decay: f64) {
    if weight_decay == 0.0 {
        return;
    }
    for (g, l) in grads.iter_mut().zip(layers) {
        for (gw, w) in g.w.data_mut().iter_mut().zip(l.w.data()) {
            *gw += weight_decay * w;
        }
        for (gb, b) in g.b.iter_mut().zip(&l.b) {
            *gb += weight_decay * b;
        }
    }
}

/// Loss over `targets` (node, label), with repeats counted, and `dL/dlogits`.
fn target_loss(logits: &Matrix, targets: &[(usize, u8)]) -> Result<(f64, Matrix), NnError> {
    if targets.is_empty() {
        return Err(NnError::Empty);
    }
    let t = targets.len() as f64;
    let mut grad = Matrix::zeros(logits.rows(), 1);
    let mut loss = 0.0;
    for &(i, y) in targets {
        if i >= logits.rows() {
            return Err(NnError::Shape(format!("target node {i} out of range")));
        }
        let z = logits.get(i, 0);
        loss += bce_term(z, y);
        grad.set(i, 0, grad.get(i, 0) + (sigmoid(z) - f64::from(y)) / t);
    }
    Ok((loss / t, grad))
}

fn all_targets(labels: &[u8]) -> Vec<(usize, u8)> {
    labels.iter().copied().enumerate().collect()
}

pub fn mlp_forward(p: &MlpParams, x: &Matrix, masks: Option<&[Matrix]>) -> Result<Matrix, NnError> {
    check_shapes(&p.layers, x, None, masks)?;
    Ok(forward(&p.layers, x, None, masks).0)
}

pub fn gcn_forward(
    p: &GcnParams,
    adj: &NormAdjacency,
    x: &Matrix,
    masks: Option<&[Matrix]>,
) -> Result<Matrix, NnError> {
    check_shapes(&p.layers, x, Some(adj), masks)?;
    Ok(forward(&p.layers, x, Some(adj), masks).0)
}

/// Objective `BCE + (wd/2)‖θ‖²` and its exact gradient.
pub fn mlp_backward(
    p: &MlpParams,
    x: &Matrix,
    labels: &[u8],
    masks: Option<&[Matrix]>,
    weight_decay: f64,
) -> Result<(f64, Vec<Dense>), NnError> {
    check_shapes(&p.layers, x, None, masks)?;
    if labels.len() != x.rows() {
        return Err(NnError::Shape(format!("{} rows vs {} labels", x.rows(), labels.len())));
    }
    let (logits, cache) = forward(&p.layers, x, None, masks);
    let (loss, dlogits) = target_loss(&logits, &all_targets(labels))?;
    let mut grads = backward_from(&p.layers, None, masks, &cache, dlogits);
    add_l2_grad(&mut grads, &p.layers, weight_decay);
    Ok((loss + l2_penalty(&p.layers, weight_decay), grads))
}

/// GCN objective over the labeled `targets` only, and its exact gradient.
pub fn gcn_backward(
    p: &GcnParams,
    adj: &NormAdjacency,
    x: &Matrix,
    targets: &[(usize, u8)],
    masks: Option<&[Matrix]>,
    weight_decay: f64,
) -> Result<(f64, Vec<Dense>), NnError> {
    check_shapes(&p.layers, x, Some(adj), masks)?;
    let (logits, cache) = forward(&p.layers, x, Some(adj), masks);
    let (loss, dlogits) = target_loss(&logits, targets)?;
    let mut grads = backward_from(&p.layers, Some(adj), masks, &cache, dlogits);
    add_l2_grad(&mut grads, &p.layers, weight_decay);
    Ok((loss + l2_penalty(&p.layers, weight_decay), grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(layers: &[Dense]) -> Self {
        let n = flatten(layers).len();
        Self { step: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }
}

/// Bias-corrected Adam update with coupled L2 (`g += wd·θ`).
pub fn adam_step(
    params: &mut [Dense],
    grads: &[Dense],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<(), NnError> {
    if params.len() != grads.len() {
        return Err(NnError::Shape("parameter/gradient layer count".into()));
    }
    for (layer, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.w.shape() != g.w.shape() || p.b.len() != g.b.len() {
            return Err(NnError::Shape(format!("gradient shape for layer {layer}")));
        }
        if !g.w.is_finite() || g.b.iter().any(|x| !x.is_finite()) {
            return Err(NnError::NonFiniteGradient { layer });
        }
    }
    let mut theta = flatten(params);
    let grad = flatten(grads);
    if theta.len() != state.m.len() {
        return Err(NnError::Shape("optimizer state size".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..theta.len() {
        let g = grad[i] + cfg.weight_decay * theta[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        theta[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    unflatten(params, &theta);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    /// Number of weight layers.
    pub layers: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Held-out F1 is recorded every this many epochs.
    pub eval_every: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn mlp_default() -> Self {
        Self {
            hidden_dim: 32,
            layers: 2,
            dropout: 0.2,
            learning_rate: 1e-3,
            weight_decay: 1e-5,
            epochs: 5000,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            eval_every: 50,
            seed: 0,
        }
    }

    pub fn gcn_default() -> Self {
        Self { hidden_dim: 64, layers: 6, epochs: 500, ..Self::mlp_default() }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.hidden_dim == 0 || self.layers == 0 {
            return Err(NnError::Config("hidden_dim and layers must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(NnError::Config("dropout must lie in [0, 1)".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) || !(self.eps > 0.0) {
            return Err(NnError::Config("learning_rate and eps must be positive, weight_decay nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(NnError::Config("adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    /// Training objective per epoch.
    pub loss: Vec<f64>,
    /// `(epoch, held-out F1)` pairs, epochs counted from 1.
    pub f1: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelParams {
    Mlp(MlpParams),
    Gcn(GcnParams),
}

impl ModelParams {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelParams::Mlp(_) => "mlp",
            ModelParams::Gcn(_) => "gcn",
        }
    }

    pub fn layers(&self) -> &[Dense] {
        match self {
            ModelParams::Mlp(p) => &p.layers,
            ModelParams::Gcn(p) => &p.layers,
        }
    }
}

/// Normalization provenance carried from the feature stage into the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub norm_stats: Option<Vec<NormStat>>,
    pub feature_order_version: String,
}

impl FeatureMeta {
    pub fn of(ds: &ContractDataset) -> Self {
        Self { norm_stats: ds.norm_stats.clone(), feature_order_version: ds.feature_order_version.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub params: ModelParams,
    pub norm_stats: Option<Vec<NormStat>>,
    pub feature_order_version: String,
    pub config: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerParams>,
    pub history: History,
}

impl ModelBundle {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        let b: ModelBundle = serde_json::from_str(text).map_err(|e| NnError::Format(e.to_string()))?;
        let layers = b.params.layers();
        let probe = Matrix::zeros(0, layers.first().map(Dense::fan_in).unwrap_or(0));
        check_shapes(layers, &probe, None, None)?;
        Ok(b)
    }

    fn check_input(&self, meta: &FeatureMeta) -> Result<(), NnError> {
        if meta.feature_order_version != self.feature_order_version {
            return Err(NnError::VersionMismatch {
                model: self.feature_order_version.clone(),
                input: meta.feature_order_version.clone(),
            });
        }
        if meta.norm_stats != self.norm_stats {
            return Err(NnError::NormMismatch);
        }
        Ok(())
    }
}

fn require_both_classes(labels: &[u8]) -> Result<(), NnError> {
    if labels.is_empty() {
        return Err(NnError::Empty);
    }
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(NnError::MissingClass);
    }
    Ok(())
}

fn f1_at_half(probs: &[f64], labels: &[u8]) -> f64 {
    eval::confusion(probs, labels, 0.5).map(|cm| eval::metrics(&cm).f1).unwrap_or(0.0)
}

/// Full-batch MLP training. `heldout` features/labels, when given, are scored
/// every `eval_every` epochs.
pub fn train_mlp(
    samples: &LabeledSamples,
    cfg: &TrainConfig,
    meta: &FeatureMeta,
    heldout: Option<(&Matrix, &[u8])>,
) -> Result<ModelBundle, NnError> {
    cfg.validate()?;
    require_both_classes(&samples.labels)?;
    let x = &samples.features;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = MlpParams { layers: init_layers(&layer_widths(x.cols(), cfg.hidden_dim, cfg.layers), &mut rng) };
    check_shapes(&params.layers, x, None, None)?;
    let adam = cfg.adam();
    let mut state = AdamState::new(&params.layers);
    let mut history = History::default();
    for epoch in 1..=cfg.epochs {
        let masks = (cfg.dropout > 0.0).then(|| hidden_masks(&params.layers, x.rows(), cfg.dropout, &mut rng));
        let (bce, grads) = mlp_backward(&params, x, &samples.labels, masks.as_deref(), 0.0)?;
        let loss = bce + l2_penalty(&params.layers, cfg.weight_decay);
        if !loss.is_finite() {
            return Err(NnError::Divergence { epoch, loss });
        }
        history.loss.push(loss);
        adam_step(&mut params.layers, &grads, &mut state, &adam)?;
        if let Some((hx, hy)) = heldout {
            if cfg.eval_every > 0 && epoch % cfg.eval_every == 0 {
                let probs = probabilities(&mlp_forward(&params, hx, None)?);
                history.f1.push((epoch, f1_at_half(&probs, hy)));
            }
        }
    }
    Ok(ModelBundle {
        params: ModelParams::Mlp(params),
        norm_stats: meta.norm_stats.clone(),
        feature_order_version: meta.feature_order_version.clone(),
        config: *cfg,
        sampler: None,
        history,
    })
}

/// Induced subgraph over the union of a batch's ego subgraphs, with the batch
/// centers (repeats kept) as loss targets.
fn batch_subgraph(
    adjacency: &[Vec<usize>],
    batch: &[crate::balance::EgoBatch],
) -> (Vec<usize>, NormAdjacency, Vec<(usize, u8)>) {
    let members: BTreeSet<usize> = batch.iter().flat_map(|b| b.node_indices.iter().copied()).collect();
    let nodes: Vec<usize> = members.into_iter().collect();
    let local = |g: usize| nodes.binary_search(&g).ok();
    let mut edges = Vec::new();
    for (la, &a) in nodes.iter().enumerate() {
        for &b in &adjacency[a] {
            if b > a {
                if let Some(lb) = local(b) {
                    edges.push((la, lb));
                }
            }
        }
    }
    let adj = gcn_normalize_adjacency(&edges, nodes.len());
    let targets = batch
        .iter()
        .map(|b| (local(b.center).expect("center is a member"), b.center_label.expect("sampled centers are labeled")))
        .collect();
    (nodes, adj, targets)
}

/// GCN training on sampled ego-subgraph batches, one optimizer step per epoch.
/// Loss is taken on batch centers only. Held-out F1 uses full-graph inference.
pub fn train_gcn(
    ds: &ContractDataset,
    train_indices: &[usize],
    sampler_params: &SamplerParams,
    cfg: &TrainConfig,
    heldout: Option<&[usize]>,
) -> Result<ModelBundle, NnError> {
    cfg.validate()?;
    let train_labels: Vec<u8> = train_indices.iter().filter_map(|&i| ds.labels.get(i).copied().flatten()).collect();
    require_both_classes(&train_labels)?;
    let mut sampler = BatchSampler::new(ds, train_indices, *sampler_params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params =
        GcnParams { layers: init_layers(&layer_widths(ds.features.cols(), cfg.hidden_dim, cfg.layers), &mut rng) };
    let full_adj = dataset_adjacency(ds);
    let lists = ds.adjacency();
    check_shapes(&params.layers, &ds.features, Some(&full_adj), None)?;
    let adam = cfg.adam();
    let mut state = AdamState::new(&params.layers);
    let mut history = History::default();
    for epoch in 1..=cfg.epochs {
        let batch = sampler.next().expect("sampler is endless");
        let (nodes, adj, targets) = batch_subgraph(&lists, &batch);
        let x = ds.features.select_rows(&nodes);
        let masks = (cfg.dropout > 0.0).then(|| hidden_masks(&params.layers, x.rows(), cfg.dropout, &mut rng));
        let (bce, grads) = gcn_backward(&params, &adj, &x, &targets, masks.as_deref(), 0.0)?;
        let loss = bce + l2_penalty(&params.layers, cfg.weight_decay);
        if !loss.is_finite() {
            return Err(NnError::Divergence { epoch, loss });
        }
        history.loss.push(loss);
        adam_step(&mut params.layers, &grads, &mut state, &adam)?;
        if let Some(idx) = heldout {
            if cfg.eval_every > 0 && epoch % cfg.eval_every == 0 && !idx.is_empty() {
                let probs = probabilities(&gcn_forward(&params, &full_adj, &ds.features, None)?);
                let p: Vec<f64> = idx.iter().map(|&i| probs[i]).collect();
                let y: Vec<u8> = idx.iter().map(|&i| ds.labels[i].unwrap_or(0)).collect();
                history.f1.push((epoch, f1_at_half(&p, &y)));
            }
        }
    }
    Ok(ModelBundle {
        params: ModelParams::Gcn(params),
        norm_stats: ds.norm_stats.clone(),
        feature_order_version: ds.feature_order_version.clone(),
        config: *cfg,
        sampler: Some(*sampler_params),
        history,
    })
}

pub fn probabilities(logits: &Matrix) -> Vec<f64> {
    logits.data().iter().map(|&z| sigmoid(z)).collect()
}

/// Scam probabilities for every contract of `ds`. GCN bundles run on the
/// full contract graph.
pub fn predict(bundle: &ModelBundle, ds: &ContractDataset) -> Result<Vec<f64>, NnError> {
    bundle.check_input(&FeatureMeta::of(ds))?;
    if ds.features.cols() != FEATURE_DIM {
        return Err(NnError::Shape(format!("expected {FEATURE_DIM} feature columns")));
    }
    let logits = match &bundle.params {
        ModelParams::Mlp(p) => mlp_forward(p, &ds.features, None)?,
        ModelParams::Gcn(p) => gcn_forward(p, &dataset_adjacency(ds), &ds.features, None)?,
    };
    Ok(probabilities(&logits))
}

/// MLP probabilities for bare feature rows that already carry `meta`.
pub fn predict_rows(bundle: &ModelBundle, meta: &FeatureMeta, x: &Matrix) -> Result<Vec<f64>, NnError> {
    bundle.check_input(meta)?;
    match &bundle.params {
        ModelParams::Mlp(p) => Ok(probabilities(&mlp_forward(p, x, None)?)),
        ModelParams::Gcn(_) => Err(NnError::Shape("GCN predictions need the contract graph".into())),
    }
}
