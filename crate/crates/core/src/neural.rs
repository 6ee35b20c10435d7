//! One-hidden-layer network mapping an embedding to a distribution over the
//! training states:
//!
//! ```text
//! input -> dropout -> dense + ReLU -> dense -> softmax
//! ```
//!
//! Trained with softmax cross-entropy against normalized successor rows.
//! Backpropagation is written out by hand; [`gradient_check`] compares it
//! against central finite differences.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{EmbeddingTable, ExampleSet};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// Predictions are clamped to this before taking the log.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
    SgdMomentum { momentum: f64 },
}

impl Optimizer {
    pub const fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub const fn sgd_momentum() -> Self {
        Optimizer::SgdMomentum { momentum: 0.9 }
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::adam()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    /// Probability of zeroing each input component during training.
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            input_dim: 0,
            hidden_dim: 128,
            output_dim: 0,
            dropout_rate: 0.8,
            learning_rate: 1e-5,
            epochs: 500,
            batch_size: 20,
            seed: 0,
            optimizer: Optimizer::default(),
        }
    }
}

impl MlpConfig {
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        MlpConfig {
            input_dim,
            output_dim,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.output_dim == 0 {
            return Err(Error::invalid("layer sizes must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid(format!(
                "dropout rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning rate must be finite and non-negative"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub config: MlpConfig,
    /// hidden x input
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// output x hidden
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

fn glorot(rng: &mut impl Rng, fan_out: usize, fan_in: usize) -> Matrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut m = Matrix::zeros(fan_out, fan_in);
    for w in m.as_mut_slice() {
        *w = rng.random_range(-limit..limit);
    }
    m
}

impl MlpModel {
    /// Seeded initialization: Glorot-uniform weights (first layer, then
    /// second), zero biases.
    pub fn init(config: &MlpConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::init_with(config, &mut rng)
    }

    fn init_with(config: &MlpConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let w1 = glorot(rng, config.hidden_dim, config.input_dim);
        let w2 = glorot(rng, config.output_dim, config.hidden_dim);
        Ok(MlpModel {
            b1: vec![0.0; config.hidden_dim],
            b2: vec![0.0; config.output_dim],
            w1,
            w2,
            config: config.clone(),
        })
    }

    pub fn zeros(config: &MlpConfig) -> Result<Self> {
        config.validate()?;
        Ok(MlpModel {
            w1: Matrix::zeros(config.hidden_dim, config.input_dim),
            b1: vec![0.0; config.hidden_dim],
            w2: Matrix::zeros(config.output_dim, config.hidden_dim),
            b2: vec![0.0; config.output_dim],
            config: config.clone(),
        })
    }

    /// Shape and finiteness check, used after deserializing.
    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        c.validate()?;
        let shapes_ok = self.w1.rows() == c.hidden_dim
            && self.w1.cols() == c.input_dim
            && self.b1.len() == c.hidden_dim
            && self.w2.rows() == c.output_dim
            && self.w2.cols() == c.hidden_dim
            && self.b2.len() == c.output_dim;
        if !shapes_ok {
            return Err(Error::invalid("parameter shapes do not match the model config"));
        }
        if !self.all_finite() {
            return Err(Error::invalid("model has non-finite parameters"));
        }
        Ok(())
    }

    fn params(&self) -> [&[f64]; 4] {
        [self.w1.as_slice(), &self.b1, self.w2.as_slice(), &self.b2]
    }

    fn params_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ]
    }

    fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    pub fn forward(&self, input: &[f64], mode: ForwardMode<'_>) -> Result<Vec<f64>> {
        Ok(self.trace(input, mode)?.probs)
    }

    fn trace(&self, input: &[f64], mode: ForwardMode<'_>) -> Result<Trace> {
        let c = &self.config;
        if input.len() != c.input_dim {
            return Err(Error::DimensionMismatch {
                expected: c.input_dim,
                actual: input.len(),
            });
        }
        let x = match mode {
            ForwardMode::Inference => input.to_vec(),
            ForwardMode::Train { mask } => {
                if mask.len() != c.input_dim {
                    return Err(Error::DimensionMismatch {
                        expected: c.input_dim,
                        actual: mask.len(),
                    });
                }
                let scale = 1.0 / (1.0 - c.dropout_rate);
                input
                    .iter()
                    .zip(mask)
                    .map(|(&v, &keep)| if keep { v * scale } else { 0.0 })
                    .collect()
            }
        };
        let pre: Vec<f64> = self
            .w1
            .iter_rows()
            .zip(&self.b1)
            .map(|(row, b)| sparse_dot(row, &x) + b)
            .collect();
        let hidden: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
        let logits: Vec<f64> = self
            .w2
            .iter_rows()
            .zip(&self.b2)
            .map(|(row, b)| dot(row, &hidden) + b)
            .collect();
        Ok(Trace {
            x,
            pre,
            hidden,
            probs: softmax(&logits),
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub enum ForwardMode<'a> {
    /// Dropout is the identity.
    Inference,
    /// Inverted dropout: kept input components are scaled by `1/(1-rate)`.
    Train { mask: &'a [bool] },
}

struct Trace {
    x: Vec<f64>,
    pre: Vec<f64>,
    hidden: Vec<f64>,
    probs: Vec<f64>,
}

/// Dot product that skips zero entries of `x` (most inputs are dropped).
#[inline]
fn sparse_dot(w: &[f64], x: &[f64]) -> f64 {
    let mut s = 0.0;
    for (a, &b) in w.iter().zip(x) {
        if b != 0.0 {
            s += a * b;
        }
    }
    s
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn forward(model: &MlpModel, input: &[f64], mode: ForwardMode<'_>) -> Result<Vec<f64>> {
    model.forward(input, mode)
}

/// Cross-entropy `-sum_j t_j ln(max(p_j, 1e-12))`.
pub fn loss(prediction: &[f64], target: &[f64]) -> f64 {
    -prediction
        .iter()
        .zip(target)
        .map(|(&p, &t)| if t == 0.0 { 0.0 } else { t * p.max(LOG_FLOOR).ln() })
        .sum::<f64>()
}

/// Parameter-shaped gradient buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Gradients {
            w1: Matrix::zeros(model.w1.rows(), model.w1.cols()),
            b1: vec![0.0; model.b1.len()],
            w2: Matrix::zeros(model.w2.rows(), model.w2.cols()),
            b2: vec![0.0; model.b2.len()],
        }
    }

    fn slices(&self) -> [&[f64]; 4] {
        [self.w1.as_slice(), &self.b1, self.w2.as_slice(), &self.b2]
    }

    fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ]
    }

    fn clear(&mut self) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn scale(&mut self, factor: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Loss and analytic gradient for a single example.
pub fn backprop(
    model: &MlpModel,
    input: &[f64],
    target: &[f64],
    mode: ForwardMode<'_>,
) -> Result<(f64, Gradients)> {
    let mut grads = Gradients::zeros_like(model);
    let l = accumulate(model, input, target, mode, &mut grads)?;
    Ok((l, grads))
}

/// Adds this example's gradient into `grads`; returns its loss.
fn accumulate(
    model: &MlpModel,
    input: &[f64],
    target: &[f64],
    mode: ForwardMode<'_>,
    grads: &mut Gradients,
) -> Result<f64> {
    if target.len() != model.config.output_dim {
        return Err(Error::DimensionMismatch {
            expected: model.config.output_dim,
            actual: target.len(),
        });
    }
    let tr = model.trace(input, mode)?;
    let l = loss(&tr.probs, target);

    // softmax + cross-entropy: dL/dz = p - t (targets sum to one)
    let dz: Vec<f64> = tr.probs.iter().zip(target).map(|(p, t)| p - t).collect();
    let hidden_dim = model.config.hidden_dim;
    let mut dh = vec![0.0; hidden_dim];
    for (k, &d) in dz.iter().enumerate() {
        grads.b2[k] += d;
        let w_row = model.w2.row(k);
        for ((g, &h), (acc, &w)) in grads
            .w2
            .row_mut(k)
            .iter_mut()
            .zip(&tr.hidden)
            .zip(dh.iter_mut().zip(w_row))
        {
            *g += d * h;
            *acc += d * w;
        }
    }
    for (i, d) in dh.iter_mut().enumerate() {
        if tr.pre[i] <= 0.0 {
            *d = 0.0;
            continue;
        }
        grads.b1[i] += *d;
        let row = grads.w1.row_mut(i);
        for (g, &x) in row.iter_mut().zip(&tr.x) {
            if x != 0.0 {
                *g += *d * x;
            }
        }
    }
    Ok(l)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss of each epoch, measured on the dropout-perturbed
    /// forward passes used for the updates.
    pub loss_per_epoch: Vec<f64>,
    /// Mean inference-mode loss over the training set after the last epoch.
    pub final_train_loss: f64,
    pub seed: u64,
}

struct OptimizerState {
    kind: Optimizer,
    first: Gradients,
    second: Gradients,
    step: i32,
}

impl OptimizerState {
    fn new(kind: Optimizer, model: &MlpModel) -> Self {
        OptimizerState {
            kind,
            first: Gradients::zeros_like(model),
            second: Gradients::zeros_like(model),
            step: 0,
        }
    }

    fn apply(&mut self, model: &mut MlpModel, grads: &Gradients, lr: f64) {
        self.step += 1;
        match self.kind {
            Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                let slices = model.params_mut();
                let ms = self.first.slices_mut();
                let vs = self.second.slices_mut();
                for (((p, g), m), v) in slices.into_iter().zip(grads.slices()).zip(ms).zip(vs) {
                    for (((w, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + epsilon);
                    }
                }
            }
            Optimizer::SgdMomentum { momentum } => {
                let slices = model.params_mut();
                let vs = self.first.slices_mut();
                for ((p, g), v) in slices.into_iter().zip(grads.slices()).zip(vs) {
                    for ((w, &g), v) in p.iter_mut().zip(g).zip(v.iter_mut()) {
                        *v = momentum * *v - lr * g;
                        *w += *v;
                    }
                }
            }
        }
    }
}

/// Minibatch training. One seeded generator drives initialization, the
/// per-epoch shuffles and every dropout mask, so the result is a pure
/// function of `(config, examples)`.
pub fn train(config: &MlpConfig, examples: &ExampleSet) -> Result<(MlpModel, TrainReport)> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::invalid("no training examples"));
    }
    if examples.targets.len() != examples.len() {
        return Err(Error::DimensionMismatch {
            expected: examples.len(),
            actual: examples.targets.len(),
        });
    }
    if let Some(t) = examples.targets.iter().find(|t| t.len() != config.output_dim) {
        return Err(Error::DimensionMismatch {
            expected: config.output_dim,
            actual: t.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = MlpModel::init_with(config, &mut rng)?;
    let mut state = OptimizerState::new(config.optimizer, &model);
    let mut grads = Gradients::zeros_like(&model);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut mask = vec![true; config.input_dim];
    let mut loss_per_epoch = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.clear();
            for &i in batch {
                for keep in mask.iter_mut() {
                    *keep = rng.random::<f64>() >= config.dropout_rate;
                }
                let l = accumulate(
                    &model,
                    &examples.inputs[i],
                    &examples.targets[i],
                    ForwardMode::Train { mask: &mask },
                    &mut grads,
                )?;
                if !l.is_finite() {
                    return Err(Error::Diverged { epoch, what: "loss" });
                }
                total += l;
            }
            grads.scale(1.0 / batch.len() as f64);
            state.apply(&mut model, &grads, config.learning_rate);
            if !model.all_finite() {
                return Err(Error::Diverged {
                    epoch,
                    what: "parameters",
                });
            }
        }
        loss_per_epoch.push(total / examples.len() as f64);
    }

    let final_train_loss = examples
        .inputs
        .iter()
        .zip(&examples.targets)
        .map(|(x, t)| model.forward(x, ForwardMode::Inference).map(|p| loss(&p, t)))
        .sum::<Result<f64>>()?
        / examples.len() as f64;
    let report = TrainReport {
        loss_per_epoch,
        final_train_loss,
        seed: config.seed,
    };
    Ok((model, report))
}

/// Largest relative discrepancy between the analytic gradient and central
/// finite differences, over every parameter of the freshly initialized
/// model for `config`. Dropout is off.
pub fn gradient_check(config: &MlpConfig, input: &[f64], target: &[f64], epsilon: f64) -> Result<f64> {
    let model = MlpModel::init(config)?;
    gradient_check_model(&model, input, target, epsilon)
}

pub fn gradient_check_model(model: &MlpModel, input: &[f64], target: &[f64], epsilon: f64) -> Result<f64> {
    let (_, analytic) = backprop(model, input, target, ForwardMode::Inference)?;
    let mut probe = model.clone();
    let eval = |m: &MlpModel| -> Result<f64> {
        Ok(loss(&m.forward(input, ForwardMode::Inference)?, target))
    };
    let mut worst: f64 = 0.0;
    for (block, grad) in analytic.slices().iter().enumerate() {
        for (idx, &a) in grad.iter().enumerate() {
            let original = probe.params()[block][idx];
            probe.params_mut()[block][idx] = original + epsilon;
            let plus = eval(&probe)?;
            probe.params_mut()[block][idx] = original - epsilon;
            let minus = eval(&probe)?;
            probe.params_mut()[block][idx] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

/// Inference-mode predictions, in the order of `words`.
pub fn predict_all<S: AsRef<str>>(
    model: &MlpModel,
    table: &EmbeddingTable,
    words: &[S],
) -> Result<Vec<Vec<f64>>> {
    words
        .iter()
        .map(|w| model.forward(table.vector(w.as_ref())?, ForwardMode::Inference))
        .collect()
}

/// On-disk model: parameters, config and the state words the outputs index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub seed: u64,
    pub state_words: Vec<String>,
    pub model: MlpModel,
}

pub fn save_checkpoint(model: &MlpModel, state_words: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ckpt = Checkpoint {
        seed: model.config.seed,
        state_words: state_words.to_vec(),
        model: model.clone(),
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, &ckpt)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint = serde_json::from_reader(BufReader::new(file))?;
    ckpt.model.validate()?;
    if ckpt.state_words.len() != ckpt.model.config.output_dim {
        return Err(Error::DimensionMismatch {
            expected: ckpt.model.config.output_dim,
            actual: ckpt.state_words.len(),
        });
    }
    Ok(ckpt)
}
