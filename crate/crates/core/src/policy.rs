//! Two-layer softmax policy over action-label embeddings, with analytic
//! gradients of log-probability and entropy, and an Adam ascent step.
//!
//! `logits = A · (W2 · relu(W1 · x))`, `probs = softmax(logits)`.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embeddings::{EmbeddingProvider, Vector};
use crate::error::{Error, Result};
use crate::kg::{ActionEdge, EntityRef};

/// Hidden width of the feed-forward layers.
pub const DEFAULT_HIDDEN: usize = 768;

/// Policy weights. Entries are kept exactly representable as `f32` so that a
/// checkpoint stores them without loss.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    /// hidden × inputDim
    pub w1: Array2<f64>,
    /// d × hidden
    pub w2: Array2<f64>,
}

pub(crate) fn round_to_f32(a: &mut Array2<f64>) {
    a.mapv_inplace(|v| f64::from(v as f32));
}

impl PolicyParams {
    /// Glorot-uniform initialization from `seed`.
    pub fn init(input_dim: usize, hidden: usize, d: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut glorot = |rows: usize, cols: usize| {
            let r = (6.0 / (rows + cols) as f64).sqrt();
            let mut m = Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-r..r));
            round_to_f32(&mut m);
            m
        };
        let w1 = glorot(hidden, input_dim);
        let w2 = glorot(d, hidden);
        PolicyParams { w1, w2 }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn d(&self) -> usize {
        self.w2.nrows()
    }

    pub fn zero_grad(&self) -> Gradients {
        Gradients {
            w1: Array2::zeros(self.w1.raw_dim()),
            w2: Array2::zeros(self.w2.raw_dim()),
        }
    }
}

/// Actions available in a state: edges plus their stacked label embeddings.
#[derive(Clone, Debug)]
pub struct ActionSet {
    pub edges: Vec<ActionEdge>,
    /// |A| × d, row i embeds `edges[i].path_label`.
    pub embeddings: Array2<f64>,
}

impl ActionSet {
    pub fn encode(edges: Vec<ActionEdge>, provider: &dyn EmbeddingProvider) -> Result<Self> {
        let d = provider.dim();
        let mut embeddings = Array2::zeros((edges.len(), d));
        for (mut row, e) in embeddings.axis_iter_mut(Axis(0)).zip(&edges) {
            row.assign(&provider.encode(&e.path_label)?);
        }
        Ok(ActionSet { edges, embeddings })
    }

    pub fn len(&self) -> usize {
        self.embeddings.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Encoded question (optionally with context prefix) and the agent's start node.
#[derive(Clone, Debug)]
pub struct StateInput {
    pub x: Vector,
    pub start: EntityRef,
}

/// Intermediate activations of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub pre: Array1<f64>,
    pub hidden: Array1<f64>,
    pub z: Array1<f64>,
    pub logits: Array1<f64>,
    pub probs: Array1<f64>,
}

fn check_shapes(params: &PolicyParams, x: ArrayView1<f64>, actions: &Array2<f64>) -> Result<()> {
    if x.len() != params.input_dim() {
        return Err(Error::Shape(format!(
            "input has {} entries, W1 expects {}",
            x.len(),
            params.input_dim()
        )));
    }
    if params.w2.ncols() != params.hidden() {
        return Err(Error::Shape("W2 columns differ from hidden width".into()));
    }
    if actions.ncols() != params.d() {
        return Err(Error::Shape(format!(
            "action embeddings have width {}, W2 produces {}",
            actions.ncols(),
            params.d()
        )));
    }
    if actions.nrows() == 0 {
        return Err(Error::Shape("empty action set".into()));
    }
    Ok(())
}

pub fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exp = logits.mapv(|v| (v - max).exp());
    let s = exp.sum();
    exp / s
}

pub fn forward_pass(params: &PolicyParams, x: ArrayView1<f64>, actions: &Array2<f64>) -> Result<ForwardPass> {
    check_shapes(params, x, actions)?;
    let pre = params.w1.dot(&x);
    let hidden = pre.mapv(|v| v.max(0.0));
    let z = params.w2.dot(&hidden);
    let logits = actions.dot(&z);
    let probs = softmax(&logits);
    Ok(ForwardPass {
        pre,
        hidden,
        z,
        logits,
        probs,
    })
}

/// Action distribution for `state` over `actions`.
pub fn forward(params: &PolicyParams, state: &StateInput, actions: &ActionSet) -> Result<Array1<f64>> {
    Ok(forward_pass(params, state.x.view(), &actions.embeddings)?.probs)
}

/// Categorical draw from `probs`.
pub fn sample_action<R: Rng + ?Sized>(probs: &Array1<f64>, rng: &mut R) -> Result<usize> {
    if probs.is_empty() {
        return Err(Error::InvalidDistribution("empty".into()));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidDistribution("negative or non-finite probability".into()));
    }
    let total = probs.sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidDistribution(format!("sums to {total}")));
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(i);
        }
    }
    // rounding slack: last index with positive mass
    Ok(probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1))
}

/// The `k` most probable indices, descending, ties to the lower index.
pub fn top_k_actions(probs: &Array1<f64>, k: usize) -> Vec<(usize, f64)> {
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    idx.into_iter().take(k).map(|i| (i, probs[i])).collect()
}

/// Natural-log entropy with `0 log 0 = 0`.
pub fn entropy(probs: &Array1<f64>) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// d log π(chosen) / d logits = onehot(chosen) − π.
pub fn dlogits_log_pi(probs: &Array1<f64>, chosen: usize) -> Array1<f64> {
    let mut g = -probs;
    g[chosen] += 1.0;
    g
}

/// dH / d logit_j = −π_j (ln π_j + H).
pub fn dlogits_entropy(probs: &Array1<f64>) -> Array1<f64> {
    let h = entropy(probs);
    probs.mapv(|p| if p > 0.0 { -p * (p.ln() + h) } else { 0.0 })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
}

impl Gradients {
    pub fn max_abs(&self) -> f64 {
        self.w1
            .iter()
            .chain(self.w2.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.max_abs() == 0.0
    }
}

/// Backpropagated signals of `dlogits`: the gradient at `z` and at the
/// pre-activation of the hidden layer (relu-masked).
pub fn backprop_signals(params: &PolicyParams, pass: &ForwardPass, actions: &Array2<f64>, dlogits: &Array1<f64>) -> (Array1<f64>, Array1<f64>) {
    let dz = actions.t().dot(dlogits);
    // W2ᵀ·dz as a sum of contiguous rows; ndarray's transposed gemv is slow
    let mut dpre = Array1::zeros(params.hidden());
    for (row, &g) in params.w2.outer_iter().zip(dz.iter()) {
        dpre.scaled_add(g, &row);
    }
    // relu subgradient is 0 at exactly 0
    dpre.zip_mut_with(&pass.pre, |g, &p| {
        if p <= 0.0 {
            *g = 0.0
        }
    });
    (dz, dpre)
}

/// Add the parameter gradient of `dlogits · logits` to `acc`.
pub fn accumulate_backprop(
    params: &PolicyParams,
    x: ArrayView1<f64>,
    pass: &ForwardPass,
    actions: &Array2<f64>,
    dlogits: &Array1<f64>,
    acc: &mut Gradients,
) {
    let (dz, dpre) = backprop_signals(params, pass, actions, dlogits);
    // rank-one updates, row by row
    for (mut row, &g) in acc.w2.outer_iter_mut().zip(dz.iter()) {
        if g != 0.0 {
            row.scaled_add(g, &pass.hidden);
        }
    }
    for (mut row, &g) in acc.w1.outer_iter_mut().zip(dpre.iter()) {
        if g != 0.0 {
            row.scaled_add(g, &x);
        }
    }
}

pub fn grad_log_pi(params: &PolicyParams, state: &StateInput, actions: &ActionSet, chosen: usize) -> Result<Gradients> {
    let pass = forward_pass(params, state.x.view(), &actions.embeddings)?;
    if chosen >= actions.len() {
        return Err(Error::Shape(format!("action {chosen} out of {}", actions.len())));
    }
    let mut g = params.zero_grad();
    accumulate_backprop(
        params,
        state.x.view(),
        &pass,
        &actions.embeddings,
        &dlogits_log_pi(&pass.probs, chosen),
        &mut g,
    );
    Ok(g)
}

pub fn grad_entropy(params: &PolicyParams, state: &StateInput, actions: &ActionSet) -> Result<Gradients> {
    let pass = forward_pass(params, state.x.view(), &actions.embeddings)?;
    let mut g = params.zero_grad();
    accumulate_backprop(
        params,
        state.x.view(),
        &pass,
        &actions.embeddings,
        &dlogits_entropy(&pass.probs),
        &mut g,
    );
    Ok(g)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m_w1: Array2<f64>,
    pub m_w2: Array2<f64>,
    pub v_w1: Array2<f64>,
    pub v_w2: Array2<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &PolicyParams) -> Self {
        AdamState {
            m_w1: Array2::zeros(params.w1.raw_dim()),
            m_w2: Array2::zeros(params.w2.raw_dim()),
            v_w1: Array2::zeros(params.w1.raw_dim()),
            v_w2: Array2::zeros(params.w2.raw_dim()),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam step in the direction of `grad` (gradient ascent).
pub fn adam_ascent_step(params: &mut PolicyParams, adam: &mut AdamState, grad: &Gradients, alpha: f64) -> Result<()> {
    if grad.w1.raw_dim() != params.w1.raw_dim() || grad.w2.raw_dim() != params.w2.raw_dim() {
        return Err(Error::Shape("gradient shape differs from parameters".into()));
    }
    adam.step += 1;
    let t = adam.step as i32;
    let (b1, b2, eps) = (adam.beta1, adam.beta2, adam.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (theta, m, v, g) in [
        (&mut params.w1, &mut adam.m_w1, &mut adam.v_w1, &grad.w1),
        (&mut params.w2, &mut adam.m_w2, &mut adam.v_w2, &grad.w2),
    ] {
        let inv_c1 = 1.0 / c1;
        let inv_c2 = 1.0 / c2;
        ndarray::Zip::from(&mut *theta)
            .and(&mut *m)
            .and(&mut *v)
            .and(g)
            .for_each(|th, m, v, &g| {
                let mn = b1 * *m + (1.0 - b1) * g;
                let vn = b2 * *v + (1.0 - b2) * g * g;
                let step = alpha * (mn * inv_c1) / ((vn * inv_c2).sqrt() + eps);
                *th = f64::from((*th + step) as f32);
                *m = f64::from(mn as f32);
                *v = f64::from(vn as f32);
            });
    }
    Ok(())
}
