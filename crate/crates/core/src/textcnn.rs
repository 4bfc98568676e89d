//! Four-branch 1-D convolutional text classifier.
//!
//! Each branch slides `FILTERS` kernels of one width over the sequence
//! (valid convolution), applies ReLU and keeps the maximum over time. The
//! pooled vectors are concatenated, passed through inverted dropout during
//! training and mapped by a dense layer to three logits and a softmax.
//!
//! Gradients are derived by hand; the model is generic over [`Real`] so the
//! same code runs at 32-bit for production and 64-bit for gradient checks.

use std::fmt::Debug;
use std::io::Write;
use std::path::Path;

use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::Draw;
use crate::embed::SequenceMatrix;
use crate::label::{Label, NUM_CLASSES};
use crate::metrics::ConfusionMatrix;

pub const KERNEL_WIDTHS: [usize; 4] = [1, 2, 3, 5];
pub const FILTERS: usize = 32;
pub const CONCAT_WIDTH: usize = KERNEL_WIDTHS.len() * FILTERS;
pub const DROPOUT: f64 = 0.4;
/// Lower bound applied to probabilities before taking the log.
pub const LOG_CLAMP: f64 = 1e-12;

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"VHSD1";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Floating-point type the network can run on.
pub trait Real: Float + Default + Debug + Send + Sync + 'static {
    fn of(v: f64) -> Self;
    fn of_f32(v: f32) -> Self;
    fn as_f64(self) -> f64;
    fn as_f32(self) -> f32;
}

impl Real for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
    fn of_f32(v: f32) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        f64::from(self)
    }
    fn as_f32(self) -> f32 {
        self
    }
}

impl Real for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn of_f32(v: f32) -> Self {
        f64::from(v)
    }
    fn as_f64(self) -> f64 {
        self
    }
    fn as_f32(self) -> f32 {
        self as f32
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CnnError {
    #[error("input dimension {found} does not match model dimension {expected}")]
    Dimension { found: usize, expected: usize },
    #[error("sequence length {0} is shorter than the widest kernel")]
    TooShort(usize),
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub dim: usize,
    pub max_len: usize,
}

impl Architecture {
    pub fn new(dim: usize, max_len: usize) -> Result<Self, CnnError> {
        let a = Architecture { dim, max_len };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<(), CnnError> {
        let widest = KERNEL_WIDTHS.iter().copied().max().unwrap_or(1);
        if self.dim == 0 {
            return Err(CnnError::Architecture("dim must be at least 1".into()));
        }
        if self.max_len < widest {
            return Err(CnnError::Architecture(format!(
                "max_len {} below widest kernel {widest}",
                self.max_len
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvBranch<F> {
    pub width: usize,
    /// `FILTERS x width x dim`, row-major.
    pub weights: Vec<F>,
    pub bias: Vec<F>,
}

/// All trainable weights. Tensor order (used by checkpoints and the
/// optimizer): each branch's weights then bias, in kernel-width order, then
/// the dense weights (`CONCAT_WIDTH x 3`) and dense bias.
#[derive(Debug, Clone, PartialEq)]
pub struct TextCnnParams<F> {
    pub arch: Architecture,
    pub branches: Vec<ConvBranch<F>>,
    pub fc_weights: Vec<F>,
    pub fc_bias: Vec<F>,
}

impl<F: Real> TextCnnParams<F> {
    pub fn zeros(arch: Architecture) -> Self {
        let branches = KERNEL_WIDTHS
            .iter()
            .map(|&width| ConvBranch {
                width,
                weights: vec![F::zero(); FILTERS * width * arch.dim],
                bias: vec![F::zero(); FILTERS],
            })
            .collect();
        Self {
            arch,
            branches,
            fc_weights: vec![F::zero(); CONCAT_WIDTH * NUM_CLASSES],
            fc_bias: vec![F::zero(); NUM_CLASSES],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(arch: Architecture, rng: &mut impl Draw) -> Self {
        let mut p = Self::zeros(arch);
        for b in &mut p.branches {
            let fan_in = (b.width * arch.dim) as f64;
            let fan_out = (b.width * FILTERS) as f64;
            let limit = (6.0 / (fan_in + fan_out)).sqrt();
            for w in &mut b.weights {
                *w = F::of((rng.unit() * 2.0 - 1.0) * limit);
            }
        }
        let limit = (6.0 / (CONCAT_WIDTH + NUM_CLASSES) as f64).sqrt();
        for w in &mut p.fc_weights {
            *w = F::of((rng.unit() * 2.0 - 1.0) * limit);
        }
        p
    }

    pub fn tensors(&self) -> Vec<&[F]> {
        let mut out: Vec<&[F]> = Vec::with_capacity(2 * self.branches.len() + 2);
        for b in &self.branches {
            out.push(&b.weights);
            out.push(&b.bias);
        }
        out.push(&self.fc_weights);
        out.push(&self.fc_bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        let mut out: Vec<&mut [F]> = Vec::with_capacity(2 * self.branches.len() + 2);
        for b in &mut self.branches {
            out.push(&mut b.weights);
            out.push(&mut b.bias);
        }
        out.push(&mut self.fc_weights);
        out.push(&mut self.fc_bias);
        out
    }

    /// Human-readable name of each tensor, aligned with [`Self::tensors`].
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for b in &self.branches {
            out.push(format!("conv{}.weight", b.width));
            out.push(format!("conv{}.bias", b.width));
        }
        out.push("fc.weight".into());
        out.push("fc.bias".into());
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn cast<G: Real>(&self) -> TextCnnParams<G> {
        let conv = |v: &[F]| v.iter().map(|x| G::of(x.as_f64())).collect::<Vec<G>>();
        TextCnnParams {
            arch: self.arch,
            branches: self
                .branches
                .iter()
                .map(|b| ConvBranch {
                    width: b.width,
                    weights: conv(&b.weights),
                    bias: conv(&b.bias),
                })
                .collect(),
            fc_weights: conv(&self.fc_weights),
            fc_bias: conv(&self.fc_bias),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Forward pass output with the activations backward needs.
#[derive(Debug, Clone)]
pub struct Forward<F> {
    pub probs: [F; NUM_CLASSES],
    pub logits: [F; NUM_CLASSES],
    /// Post-ReLU max-pooled features, `CONCAT_WIDTH` long.
    pub pooled: Vec<F>,
    /// Time step that won the max for each pooled unit.
    pub argmax: Vec<usize>,
    /// Dropout multipliers (0 or 1/(1-p) in train mode, 1 in eval mode).
    pub mask: Vec<F>,
    /// `pooled * mask`, the dense layer's input.
    pub hidden: Vec<F>,
}

fn check_input<F>(x: &[F], dim: usize, params_dim: usize) -> Result<usize, CnnError> {
    if dim != params_dim || !x.len().is_multiple_of(dim) {
        return Err(CnnError::Dimension {
            found: dim,
            expected: params_dim,
        });
    }
    let len = x.len() / dim;
    let widest = KERNEL_WIDTHS.iter().copied().max().unwrap_or(1);
    if len < widest {
        return Err(CnnError::TooShort(len));
    }
    Ok(len)
}

fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Numerically stable softmax.
pub fn softmax<F: Real>(logits: &[F; NUM_CLASSES]) -> [F; NUM_CLASSES] {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let mut out = [F::zero(); NUM_CLASSES];
    let mut sum = F::zero();
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum = sum + *o;
    }
    for o in &mut out {
        *o = *o / sum;
    }
    out
}

/// Runs the network on a row-major `len x dim` input.
pub fn forward<F: Real>(
    x: &[F],
    dim: usize,
    params: &TextCnnParams<F>,
    mode: Mode,
    rng: &mut impl Draw,
) -> Result<Forward<F>, CnnError> {
    let len = check_input(x, dim, params.arch.dim)?;
    let mut pooled = Vec::with_capacity(CONCAT_WIDTH);
    let mut argmax = Vec::with_capacity(CONCAT_WIDTH);
    for branch in &params.branches {
        let span = branch.width * dim;
        let positions = len - branch.width + 1;
        for f in 0..FILTERS {
            let kernel = &branch.weights[f * span..(f + 1) * span];
            let mut best = F::neg_infinity();
            let mut best_t = 0;
            for t in 0..positions {
                let z = branch.bias[f] + dot(kernel, &x[t * dim..t * dim + span]);
                if z > best {
                    best = z;
                    best_t = t;
                }
            }
            pooled.push(best.max(F::zero()));
            argmax.push(best_t);
        }
    }

    let mask: Vec<F> = match mode {
        Mode::Eval => vec![F::one(); CONCAT_WIDTH],
        Mode::Train => {
            let keep = F::of(1.0 / (1.0 - DROPOUT));
            (0..CONCAT_WIDTH)
                .map(|_| if rng.unit() >= DROPOUT { keep } else { F::zero() })
                .collect()
        }
    };
    let hidden: Vec<F> = pooled.iter().zip(&mask).map(|(&p, &m)| p * m).collect();

    let mut logits = [F::zero(); NUM_CLASSES];
    for (c, l) in logits.iter_mut().enumerate() {
        *l = params.fc_bias[c];
    }
    for (i, &h) in hidden.iter().enumerate() {
        let row = &params.fc_weights[i * NUM_CLASSES..(i + 1) * NUM_CLASSES];
        for (l, &w) in logits.iter_mut().zip(row) {
            *l = *l + h * w;
        }
    }
    Ok(Forward {
        probs: softmax(&logits),
        logits,
        pooled,
        argmax,
        mask,
        hidden,
    })
}

/// `-ln p[gold]`, with `p` clamped at [`LOG_CLAMP`].
pub fn cross_entropy<F: Real>(probs: &[F; NUM_CLASSES], gold: Label) -> F {
    -probs[gold.index()].max(F::of(LOG_CLAMP)).ln()
}

/// Gradient of the cross-entropy loss with respect to the logits: `p - y`.
pub fn logit_gradient<F: Real>(probs: &[F; NUM_CLASSES], gold: Label) -> [F; NUM_CLASSES] {
    let mut g = *probs;
    g[gold.index()] = g[gold.index()] - F::one();
    g
}

fn accumulate_sample<F: Real>(
    x: &[F],
    dim: usize,
    gold: Label,
    fwd: &Forward<F>,
    params: &TextCnnParams<F>,
    scale: F,
    grads: &mut TextCnnParams<F>,
) {
    let dlogits = logit_gradient(&fwd.probs, gold).map(|g| g * scale);
    for (gb, &d) in grads.fc_bias.iter_mut().zip(&dlogits) {
        *gb = *gb + d;
    }
    for i in 0..CONCAT_WIDTH {
        let h = fwd.hidden[i];
        let w_row = &params.fc_weights[i * NUM_CLASSES..(i + 1) * NUM_CLASSES];
        let g_row = &mut grads.fc_weights[i * NUM_CLASSES..(i + 1) * NUM_CLASSES];
        let mut dh = F::zero();
        for c in 0..NUM_CLASSES {
            g_row[c] = g_row[c] + h * dlogits[c];
            dh = dh + w_row[c] * dlogits[c];
        }
        // ReLU passes gradient only when the pooled maximum was positive
        if fwd.pooled[i] <= F::zero() {
            continue;
        }
        let dz = dh * fwd.mask[i];
        if dz == F::zero() {
            continue;
        }
        let (b, f) = (i / FILTERS, i % FILTERS);
        let branch = &mut grads.branches[b];
        let span = branch.width * dim;
        let t = fwd.argmax[i];
        let window = &x[t * dim..t * dim + span];
        for (g, &xv) in branch.weights[f * span..(f + 1) * span].iter_mut().zip(window) {
            *g = *g + dz * xv;
        }
        branch.bias[f] = branch.bias[f] + dz;
    }
}

/// Mean cross-entropy over the batch and its gradient.
///
/// Dropout masks are drawn from `rng` in batch order, so replaying the same
/// rng state reproduces the same masks.
pub fn loss_and_grad<F: Real, X: AsRef<[F]>>(
    batch: &[(X, Label)],
    dim: usize,
    params: &TextCnnParams<F>,
    mode: Mode,
    rng: &mut impl Draw,
) -> Result<(F, TextCnnParams<F>), CnnError> {
    let mut grads = TextCnnParams::zeros(params.arch);
    if batch.is_empty() {
        return Ok((F::zero(), grads));
    }
    let scale = F::one() / F::of(batch.len() as f64);
    let mut loss = F::zero();
    for (x, gold) in batch {
        let x = x.as_ref();
        let fwd = forward(x, dim, params, mode, rng)?;
        loss = loss + cross_entropy(&fwd.probs, *gold);
        accumulate_sample(x, dim, *gold, &fwd, params, scale, &mut grads);
    }
    Ok((loss * scale, grads))
}

/// Gradients of the mean batch loss (train-mode forward).
pub fn backward<F: Real, X: AsRef<[F]>>(
    batch: &[(X, Label)],
    dim: usize,
    params: &TextCnnParams<F>,
    rng: &mut impl Draw,
) -> Result<TextCnnParams<F>, CnnError> {
    loss_and_grad(batch, dim, params, Mode::Train, rng).map(|(_, g)| g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub m: TextCnnParams<F>,
    pub v: TextCnnParams<F>,
    pub step: u64,
}

impl<F: Real> AdamState<F> {
    pub fn new(arch: Architecture) -> Self {
        Self {
            m: TextCnnParams::zeros(arch),
            v: TextCnnParams::zeros(arch),
            step: 0,
        }
    }
}

/// One Adam update with bias correction.
pub fn adam_step<F: Real>(
    params: &mut TextCnnParams<F>,
    grads: &TextCnnParams<F>,
    state: &mut AdamState<F>,
    cfg: &AdamConfig,
) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = F::of(1.0 - cfg.beta1.powi(t));
    let c2 = F::of(1.0 - cfg.beta2.powi(t));
    let (b1, b2) = (F::of(cfg.beta1), F::of(cfg.beta2));
    let (lr, eps) = (F::of(cfg.learning_rate), F::of(cfg.epsilon));
    let one = F::one();
    let g_all = grads.tensors();
    let m_all = state.m.tensors_mut();
    let v_all = state.v.tensors_mut();
    for (((p, g), m), v) in params.tensors_mut().into_iter().zip(g_all).zip(m_all).zip(v_all) {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (one - b1) * g[i];
            v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Stop once training accuracy (eval mode) reaches this value.
    pub stop_at_train_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: 64,
            epochs: 10,
            seed: 0,
            stop_at_train_accuracy: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), CnnError> {
        if self.adam.learning_rate.is_nan() || self.adam.learning_rate <= 0.0 {
            return Err(CnnError::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(CnnError::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean train-mode loss over the epoch's batches.
    pub train_loss: f64,
    /// Eval-mode accuracy on the training set after the epoch.
    pub train_accuracy: f64,
    /// Macro F1 on the dev set, when one was given.
    pub dev_f1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best dev F1 (last epoch without dev data).
    pub params: TextCnnParams<f32>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    /// Eval-mode mean loss of the initial weights on the training set.
    pub initial_loss: f64,
}

fn inputs_of(data: &[(SequenceMatrix, Label)], arch: &Architecture) -> Result<Vec<(Vec<f32>, Label)>, CnnError> {
    data.iter()
        .map(|(m, l)| {
            if m.dim != arch.dim {
                return Err(CnnError::Dimension {
                    found: m.dim,
                    expected: arch.dim,
                });
            }
            Ok((m.rows.clone(), *l))
        })
        .collect()
}

fn evaluate(data: &[(Vec<f32>, Label)], params: &TextCnnParams<f32>) -> Result<(f64, ConfusionMatrix), CnnError> {
    let mut loss = 0.0;
    let mut cm = ConfusionMatrix::default();
    let mut no_rng = rand::rngs::mock::StepRng::new(0, 0);
    for (x, gold) in data {
        let fwd = forward(x, params.arch.dim, params, Mode::Eval, &mut no_rng)?;
        loss += cross_entropy(&fwd.probs, *gold).as_f64();
        cm.add(*gold, argmax(&fwd.probs));
    }
    Ok((loss / data.len().max(1) as f64, cm))
}

/// Index of the largest probability; ties go to the lowest class.
pub fn argmax<F: Real>(probs: &[F; NUM_CLASSES]) -> Label {
    let mut best = 0;
    for c in 1..NUM_CLASSES {
        if probs[c] > probs[best] {
            best = c;
        }
    }
    Label::ALL[best]
}

/// Mini-batch Adam training with per-epoch seeded shuffling.
pub fn train(
    train_set: &[(SequenceMatrix, Label)],
    dev_set: &[(SequenceMatrix, Label)],
    arch: Architecture,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, CnnError> {
    if train_set.is_empty() {
        return Err(CnnError::EmptyDataset);
    }
    arch.validate()?;
    cfg.validate()?;
    let train_x = inputs_of(train_set, &arch)?;
    let dev_x = inputs_of(dev_set, &arch)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = TextCnnParams::<f32>::init(arch, &mut rng);
    let mut state = AdamState::new(arch);
    let (initial_loss, _) = evaluate(&train_x, &params)?;

    let mut order: Vec<usize> = (0..train_x.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, TextCnnParams<f32>)> = None;
    for epoch in 1..=cfg.epochs {
        for i in (1..order.len()).rev() {
            let j = rng.below(i + 1);
            order.swap(i, j);
        }
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[f32], Label)> =
                chunk.iter().map(|&i| (train_x[i].0.as_slice(), train_x[i].1)).collect();
            let (loss, grads) = loss_and_grad(&batch, arch.dim, &params, Mode::Train, &mut rng)?;
            loss_sum += loss.as_f64() * chunk.len() as f64;
            adam_step(&mut params, &grads, &mut state, &cfg.adam);
        }
        let (_, train_cm) = evaluate(&train_x, &params)?;
        let train_accuracy = train_cm.standard_accuracy();
        let dev_f1 = if dev_x.is_empty() {
            None
        } else {
            let (_, cm) = evaluate(&dev_x, &params)?;
            Some(cm.report().map(|r| r.f1).unwrap_or(0.0))
        };
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train_x.len() as f64,
            train_accuracy,
            dev_f1,
        });
        tracing::debug!(epoch, train_accuracy, ?dev_f1, "epoch done");
        let score = dev_f1.unwrap_or(f64::INFINITY);
        let improved = match &best {
            None => true,
            Some((s, _, _)) => dev_f1.is_none() || score > *s,
        };
        if improved {
            best = Some((score, epoch, params.clone()));
        }
        if cfg
            .stop_at_train_accuracy
            .is_some_and(|target| train_accuracy >= target)
        {
            break;
        }
    }
    let (best_epoch, params) = match best {
        Some((_, e, p)) => (e, p),
        None => (0, params),
    };
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
        initial_loss,
    })
}

/// Eval-mode class probabilities for one encoded comment.
pub fn predict_probs(params: &TextCnnParams<f32>, x: &SequenceMatrix) -> Result<[f32; NUM_CLASSES], CnnError> {
    let mut no_rng = rand::rngs::mock::StepRng::new(0, 0);
    forward(&x.rows, x.dim, params, Mode::Eval, &mut no_rng).map(|f| f.probs)
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint architecture mismatch: {0}")]
    Architecture(String),
    #[error("checkpoint dimension {model} does not match embedding dimension {embeddings}")]
    DimMismatch { model: usize, embeddings: usize },
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    dim: usize,
    max_len: usize,
    kernel_widths: Vec<usize>,
    filters: usize,
    classes: usize,
}

/// Serializes parameters as `VHSD1 | version | header | f32 tensors`.
pub fn write_checkpoint(params: &TextCnnParams<f32>, mut w: impl Write) -> std::io::Result<()> {
    let header = CheckpointHeader {
        dim: params.arch.dim,
        max_len: params.arch.max_len,
        kernel_widths: KERNEL_WIDTHS.to_vec(),
        filters: FILTERS,
        classes: NUM_CLASSES,
    };
    let meta = serde_json::to_vec(&header).map_err(std::io::Error::other)?;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(meta.len() as u32).to_le_bytes())?;
    w.write_all(&meta)?;
    for tensor in params.tensors() {
        for v in tensor {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_checkpoint(params: &TextCnnParams<f32>, path: &Path) -> Result<(), CheckpointError> {
    let mut buf = Vec::new();
    write_checkpoint(params, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<TextCnnParams<f32>, CheckpointError> {
    let corrupt = |m: &str| CheckpointError::Corrupt(m.to_string());
    if bytes.len() < 13 {
        return Err(corrupt("file too short"));
    }
    if &bytes[..5] != CHECKPOINT_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let meta_len = u32::from_le_bytes(bytes[9..13].try_into().expect("4 bytes")) as usize;
    let body = &bytes[13..];
    if body.len() < meta_len {
        return Err(corrupt("truncated header"));
    }
    let header: CheckpointHeader =
        serde_json::from_slice(&body[..meta_len]).map_err(|e| corrupt(&format!("header: {e}")))?;
    if header.kernel_widths != KERNEL_WIDTHS || header.filters != FILTERS || header.classes != NUM_CLASSES {
        return Err(CheckpointError::Architecture(format!(
            "widths {:?}, filters {}, classes {}",
            header.kernel_widths, header.filters, header.classes
        )));
    }
    let arch = Architecture::new(header.dim, header.max_len)
        .map_err(|e| CheckpointError::Architecture(e.to_string()))?;
    let mut params = TextCnnParams::<f32>::zeros(arch);
    let mut data = &body[meta_len..];
    let expected = params.num_params() * 4;
    if data.len() != expected {
        return Err(corrupt(&format!("expected {expected} tensor bytes, found {}", data.len())));
    }
    for tensor in params.tensors_mut() {
        for v in tensor.iter_mut() {
            *v = f32::from_le_bytes(data[..4].try_into().expect("4 bytes"));
            data = &data[4..];
        }
    }
    if !params.all_finite() {
        return Err(corrupt("non-finite weight"));
    }
    Ok(params)
}

pub fn load_checkpoint(path: &Path) -> Result<TextCnnParams<f32>, CheckpointError> {
    read_checkpoint(&std::fs::read(path)?)
}

/// Rejects a model whose input dimension differs from the embedding table's.
pub fn check_embedding_dim(params: &TextCnnParams<f32>, embedding_dim: usize) -> Result<(), CheckpointError> {
    if params.arch.dim != embedding_dim {
        return Err(CheckpointError::DimMismatch {
            model: params.arch.dim,
            embeddings: embedding_dim,
        });
    }
    Ok(())
}

/// Short content hash of a checkpoint, used as the model version tag.
pub fn model_version(params: &TextCnnParams<f32>) -> String {
    let mut buf = Vec::new();
    write_checkpoint(params, &mut buf).expect("writing to a Vec cannot fail");
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in buf {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("textcnn-{h:016x}")
}
