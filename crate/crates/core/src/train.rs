//! Deterministic mini-batch SGD with momentum.
//!
//! Each step uses the batch-mean loss. Class weights are frozen from the
//! training split before the first epoch. After every epoch the loss and
//! accuracy are recomputed on the full training and validation splits.

use alloc::string::String;
use alloc::vec::Vec;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::grad::logit_grad_into;
use crate::loss::{
    adaptive_weights, argmax, clamp_mass, sample_terms, softmax_unclamped_into, ClassWeights, LogitVector, LossConfig,
    LossId, ProbabilityVector,
};
use crate::model::{Model, ModelSpec, Workspace};
use crate::rng::{streams, CounterRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub loss: LossId,
    pub loss_config: LossConfig,
    pub learning_rate: f64,
    /// In `[0, 1)`.
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossId::Ahfe,
            loss_config: LossConfig::default(),
            learning_rate: 0.1,
            momentum: 0.9,
            batch_size: 32,
            epochs: 128,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, train_len: usize) -> Result<()> {
        self.loss_config.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be > 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must lie in [0, 1)"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.batch_size == 0 || self.batch_size > train_len {
            return Err(Error::config(alloc::format!(
                "batch_size must lie in [1, {train_len}], got {}",
                self.batch_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingCurves {
    pub records: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: Model,
    pub curves: TrainingCurves,
    pub config: TrainConfig,
    pub class_weights: ClassWeights,
    pub warnings: Vec<String>,
}

impl TrainedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.model.spec
    }

    pub fn parameters(&self) -> &[f64] {
        &self.model.parameters
    }

    pub fn forward(&self, features: &[f64]) -> Result<LogitVector> {
        self.model.forward(features)
    }

    pub fn predict(&self, features: &[f64]) -> Result<(usize, ProbabilityVector)> {
        self.model.predict(features)
    }
}

/// Per-sample scratch for loss evaluation.
struct Scratch {
    ws: Workspace,
    logits: Vec<f64>,
    probs: Vec<f64>,
    clamped: Vec<f64>,
    dlogits: Vec<f64>,
}

impl Scratch {
    fn new(model: &Model) -> Self {
        let k = model.spec.num_classes;
        Scratch {
            ws: model.workspace(),
            logits: alloc::vec![0.0; k],
            probs: alloc::vec![0.0; k],
            clamped: alloc::vec![0.0; k],
            dlogits: alloc::vec![0.0; k],
        }
    }

    /// Forward pass on `x`; returns the per-sample loss and fills the
    /// unclamped and clamped probabilities.
    fn sample_loss(
        &mut self,
        model: &Model,
        x: &[f64],
        target: usize,
        loss: LossId,
        alpha: &[f64],
        cfg: &LossConfig,
    ) -> f64 {
        model.forward_into(x, &mut self.ws, &mut self.logits);
        softmax_unclamped_into(&self.logits, &mut self.probs);
        self.clamped.copy_from_slice(&self.probs);
        clamp_mass(&mut self.clamped, cfg.p_floor);
        let (focal, entropy) = sample_terms(loss, &self.clamped, target, alpha, cfg);
        focal + entropy
    }
}

#[allow(clippy::too_many_arguments)]
fn accumulate_batch(
    model: &Model,
    data: &LabeledDataset,
    indices: &[usize],
    loss: LossId,
    alpha: &[f64],
    cfg: &LossConfig,
    scratch: &mut Scratch,
    grad: &mut [f64],
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let inv_n = 1.0 / indices.len() as f64;
    let mut total = 0.0;
    for &i in indices {
        let x = data.row(i);
        let t = data.label(i);
        total += scratch.sample_loss(model, x, t, loss, alpha, cfg);
        logit_grad_into(loss, &scratch.probs, t, alpha, cfg, &mut scratch.dlogits);
        scratch.dlogits.iter_mut().for_each(|d| *d *= inv_n);
        model.backward_into(x, &scratch.dlogits, &mut scratch.ws, grad);
    }
    total * inv_n
}

/// Mean loss over the rows at `indices` and its gradient with respect to
/// the model parameters.
pub fn loss_and_gradient(
    model: &Model,
    data: &LabeledDataset,
    indices: &[usize],
    loss: LossId,
    weights: &ClassWeights,
    cfg: &LossConfig,
) -> Result<(f64, Vec<f64>)> {
    check_compatible(&model.spec, data, "data")?;
    if indices.is_empty() || indices.iter().any(|&i| i >= data.len()) {
        return Err(Error::input("batch indices empty or out of range"));
    }
    let mut scratch = Scratch::new(model);
    let mut grad = alloc::vec![0.0; model.parameters.len()];
    let value = accumulate_batch(model, data, indices, loss, &weights.alpha, cfg, &mut scratch, &mut grad);
    Ok((value, grad))
}

/// Mean loss and accuracy of `model` over the whole dataset.
pub fn evaluate(
    model: &Model,
    data: &LabeledDataset,
    loss: LossId,
    weights: &ClassWeights,
    cfg: &LossConfig,
) -> (f64, f64) {
    let mut scratch = Scratch::new(model);
    let (mut total, mut correct) = (0.0, 0usize);
    for i in 0..data.len() {
        let t = data.label(i);
        total += scratch.sample_loss(model, data.row(i), t, loss, &weights.alpha, cfg);
        if argmax(&scratch.clamped) == t {
            correct += 1;
        }
    }
    let n = data.len() as f64;
    (total / n, correct as f64 / n)
}

/// Predicted class for every row.
pub fn predict_all(model: &Model, data: &LabeledDataset) -> Vec<usize> {
    let mut scratch = Scratch::new(model);
    let cfg = LossConfig::default();
    (0..data.len())
        .map(|i| {
            scratch.sample_loss(model, data.row(i), data.label(i), LossId::Cce, &[], &cfg);
            argmax(&scratch.clamped)
        })
        .collect()
}

fn check_compatible(spec: &ModelSpec, data: &LabeledDataset, what: &str) -> Result<()> {
    if data.dim() != spec.input_dim {
        return Err(Error::input(alloc::format!(
            "{what} has {} features but the model expects {}",
            data.dim(),
            spec.input_dim
        )));
    }
    if data.num_classes() != spec.num_classes {
        return Err(Error::input(alloc::format!(
            "{what} has {} classes but the model expects {}",
            data.num_classes(),
            spec.num_classes
        )));
    }
    Ok(())
}

/// Class weights the trainer uses for `cfg`: adaptive weights from the
/// training counts for AHFE, all ones otherwise.
pub fn training_weights(train: &LabeledDataset, cfg: &TrainConfig) -> Result<ClassWeights> {
    match cfg.loss {
        LossId::Ahfe => adaptive_weights(train.class_counts(), &cfg.loss_config),
        LossId::Cce | LossId::Focal => Ok(ClassWeights::uniform(train.num_classes())),
    }
}

pub fn train(
    train: &LabeledDataset,
    val: &LabeledDataset,
    spec: &ModelSpec,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    spec.validate()?;
    check_compatible(spec, train, "training split")?;
    check_compatible(spec, val, "validation split")?;
    if val.is_empty() {
        return Err(Error::input("validation split is empty"));
    }
    cfg.validate(train.len())?;

    let mut warnings = Vec::new();
    if cfg.loss == LossId::Ahfe {
        for k in train.empty_classes() {
            warnings.push(alloc::format!(
                "class {k} is empty in the training split; its weight is 1/sqrt(epsilon)"
            ));
        }
    }
    let weights = training_weights(train, cfg)?;
    let alpha = weights.alpha.as_slice();
    let lc = &cfg.loss_config;

    let mut model = Model::initialized(*spec, cfg.seed)?;
    let mut scratch = Scratch::new(&model);
    let mut grad = alloc::vec![0.0; model.parameters.len()];
    let mut velocity = alloc::vec![0.0; model.parameters.len()];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut records = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            order.iter_mut().enumerate().for_each(|(i, o)| *o = i);
            CounterRng::new(cfg.seed, streams::SHUFFLE_BASE + epoch as u64).shuffle(&mut order);
        }
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let value = accumulate_batch(&model, train, batch, cfg.loss, alpha, lc, &mut scratch, &mut grad);
            let failure = Error::NumericalFailure { epoch, batch: b + 1 };
            if !value.is_finite() {
                return Err(failure);
            }
            for ((theta, v), &g) in model.parameters.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = cfg.momentum * *v + g;
                *theta -= cfg.learning_rate * *v;
            }
            if model.parameters.iter().any(|p| !p.is_finite()) {
                return Err(failure);
            }
        }
        let (train_loss, train_accuracy) = evaluate(&model, train, cfg.loss, &weights, lc);
        let (val_loss, val_accuracy) = evaluate(&model, val, cfg.loss, &weights, lc);
        if !(train_loss.is_finite() && val_loss.is_finite()) {
            return Err(Error::NumericalFailure {
                epoch,
                batch: order.len().div_ceil(cfg.batch_size),
            });
        }
        records.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            train_accuracy,
            val_accuracy,
        });
    }

    Ok(TrainedModel {
        model,
        curves: TrainingCurves { records },
        config: *cfg,
        class_weights: weights,
        warnings,
    })
}
