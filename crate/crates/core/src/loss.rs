//! Loss evaluation: categorical cross-entropy, focal, entropy, adaptive class
//! weights, and the combined AHFE loss
//!
//! ```text
//! AHFE = -(1/N) Σ_i Σ_k α_k [ (1 - p_ik)^γ y_ik ln p_ik + λ p_ik ln p_ik ]
//! α_k  = 1 / sqrt(N_k + ε)
//! ```
//!
//! With a one-hot `y` the focal bracket only survives for the true class `t`,
//! so a single sample contributes `α_t (1 - p_t)^γ (-ln p_t)` plus
//! `λ Σ_k α_k (-p_k ln p_k)`. Positive `λ` therefore adds the (weighted)
//! entropy of the prediction to the loss, pushing predictions toward
//! confidence; negative `λ` rewards entropy instead.
//!
//! Every probability is clamped into `[p_floor, 1 - p_floor]` before any
//! logarithm, so `ln 0` and `0 ln 0` never occur.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

pub const DEFAULT_P_FLOOR: f64 = 1e-12;
pub const DEFAULT_GAMMA: f64 = 2.0;
pub const DEFAULT_LAMBDA: f64 = 0.1;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Below this ε an all-zero count vector would divide by (nearly) zero.
const MIN_EPSILON_FOR_EMPTY: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossId {
    Cce,
    Focal,
    Ahfe,
}

impl LossId {
    pub const ALL: [LossId; 3] = [LossId::Cce, LossId::Focal, LossId::Ahfe];

    pub fn as_str(self) -> &'static str {
        match self {
            LossId::Cce => "cce",
            LossId::Focal => "focal",
            LossId::Ahfe => "ahfe",
        }
    }
}

impl fmt::Display for LossId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cce" => Ok(LossId::Cce),
            "focal" => Ok(LossId::Focal),
            "ahfe" => Ok(LossId::Ahfe),
            other => Err(Error::input(alloc::format!(
                "unknown loss `{other}` (expected cce, focal or ahfe)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum WeightMode {
    /// `α_k = 1 / sqrt(N_k + ε)`.
    #[default]
    Raw,
    /// Raw weights rescaled to mean 1.
    MeanNormalized,
    /// All weights 1.
    Uniform,
}

impl WeightMode {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightMode::Raw => "raw",
            WeightMode::MeanNormalized => "mean_normalized",
            WeightMode::Uniform => "uniform",
        }
    }
}

impl fmt::Display for WeightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(WeightMode::Raw),
            "mean_normalized" | "mean-normalized" => Ok(WeightMode::MeanNormalized),
            "uniform" => Ok(WeightMode::Uniform),
            other => Err(Error::config(alloc::format!(
                "unknown weight mode `{other}` (expected raw, mean_normalized or uniform)"
            ))),
        }
    }
}

/// Hyperparameters shared by the focal, entropy and AHFE losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Focusing exponent, `γ ≥ 0`.
    pub gamma: f64,
    /// Entropy coefficient; any finite sign.
    pub lambda: f64,
    /// Smoothing constant inside the class-weight square root, `ε > 0`.
    pub epsilon: f64,
    pub weight_mode: WeightMode,
    /// Probability clamp, in `(0, 1e-3]`.
    pub p_floor: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            gamma: DEFAULT_GAMMA,
            lambda: DEFAULT_LAMBDA,
            epsilon: DEFAULT_EPSILON,
            weight_mode: WeightMode::Raw,
            p_floor: DEFAULT_P_FLOOR,
        }
    }
}

impl LossConfig {
    /// The configuration under which AHFE coincides with plain cross-entropy.
    pub fn cce_equivalent() -> Self {
        LossConfig {
            gamma: 0.0,
            lambda: 0.0,
            weight_mode: WeightMode::Uniform,
            ..LossConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma)?;
        if !self.lambda.is_finite() {
            return Err(Error::config("lambda must be finite"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config("epsilon must be a finite value > 0"));
        }
        check_floor(self.p_floor)
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma >= 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::config(alloc::format!(
            "gamma must be finite and >= 0, got {gamma}"
        )))
    }
}

fn check_floor(p_floor: f64) -> Result<()> {
    if p_floor > 0.0 && p_floor <= 1e-3 {
        Ok(())
    } else {
        Err(Error::config(alloc::format!(
            "p_floor must lie in (0, 1e-3], got {p_floor}"
        )))
    }
}

/// Raw pre-softmax scores for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::input("logits need at least 2 classes"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(alloc::format!("logit {i} is not finite")));
        }
        Ok(LogitVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// A normalized, clamped class distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    probs: Vec<f64>,
    p_floor: f64,
}

impl ProbabilityVector {
    /// Builds a distribution from explicit probabilities. The input must sum
    /// to 1 within 1e-9; entries are then clamped like [`softmax`] output.
    pub fn new(probs: Vec<f64>, p_floor: f64) -> Result<Self> {
        check_floor(p_floor)?;
        if probs.len() < 2 {
            return Err(Error::input("probability vector needs at least 2 classes"));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::input("probabilities must be finite and non-negative"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::input(alloc::format!("probabilities sum to {sum}, not 1")));
        }
        let mut probs = probs;
        if sum != 1.0 {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        clamp_mass(&mut probs, p_floor);
        Ok(ProbabilityVector { probs, p_floor })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    pub fn p_floor(&self) -> f64 {
        self.p_floor
    }

    /// Index of the largest probability, ties going to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OneHotLabel {
    pub class_index: usize,
}

impl OneHotLabel {
    pub fn new(class_index: usize) -> Self {
        OneHotLabel { class_index }
    }

    pub fn check(self, num_classes: usize) -> Result<usize> {
        if self.class_index < num_classes {
            Ok(self.class_index)
        } else {
            Err(Error::input(alloc::format!(
                "label {} out of range for {num_classes} classes",
                self.class_index
            )))
        }
    }

    /// `y_k` of the expanded one-hot vector.
    pub fn indicator(self, k: usize) -> f64 {
        if k == self.class_index {
            1.0
        } else {
            0.0
        }
    }
}

impl From<usize> for OneHotLabel {
    fn from(class_index: usize) -> Self {
        OneHotLabel { class_index }
    }
}

/// Per-class multipliers α_k and the counts they were derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights {
    pub alpha: Vec<f64>,
    pub source_counts: Vec<usize>,
}

impl ClassWeights {
    pub fn uniform(num_classes: usize) -> Self {
        ClassWeights {
            alpha: alloc::vec![1.0; num_classes],
            source_counts: Vec::new(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.alpha.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchLossResult {
    pub total: f64,
    pub per_sample: Vec<f64>,
    /// Batch mean of the class-weighted focal term.
    pub focal_part: f64,
    /// Batch mean of the λ-scaled class-weighted entropy term.
    pub entropy_part: f64,
}

/// Max-subtracted softmax without clamping.
pub(crate) fn softmax_unclamped_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = libm::exp(z - max);
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Raises every entry below `p_floor` to exactly `p_floor` and rescales the
/// remaining entries so the vector still sums to one, repeating until no
/// free entry falls below the floor. Leaves already-valid vectors untouched.
pub(crate) fn clamp_mass(p: &mut [f64], p_floor: f64) {
    let k = p.len();
    let mut pinned = 0usize;
    let mut is_pinned = [false; 64];
    let mut pinned_heap: Vec<bool>;
    let flags: &mut [bool] = if k <= 64 {
        &mut is_pinned[..k]
    } else {
        pinned_heap = alloc::vec![false; k];
        &mut pinned_heap
    };
    loop {
        let mut changed = false;
        for (v, pin) in p.iter_mut().zip(flags.iter_mut()) {
            if !*pin && *v < p_floor {
                *v = p_floor;
                *pin = true;
                pinned += 1;
                changed = true;
            }
        }
        if !changed || pinned == k {
            break;
        }
        let free: f64 = p
            .iter()
            .zip(flags.iter())
            .filter(|(_, pin)| !**pin)
            .map(|(v, _)| *v)
            .sum();
        let scale = (1.0 - pinned as f64 * p_floor) / free;
        for (v, pin) in p.iter_mut().zip(flags.iter()) {
            if !*pin {
                *v *= scale;
            }
        }
    }
    if pinned > 0 {
        let ceiling = 1.0 - p_floor;
        for v in p.iter_mut() {
            *v = v.min(ceiling);
        }
    }
}

/// Softmax with the default probability floor.
pub fn softmax(logits: &LogitVector) -> ProbabilityVector {
    softmax_with_floor(logits, DEFAULT_P_FLOOR)
}

/// Numerically stable softmax; entries are then clamped into
/// `[p_floor, 1 - p_floor]` with the clamped mass taken from the free entries.
pub fn softmax_with_floor(logits: &LogitVector, p_floor: f64) -> ProbabilityVector {
    let mut probs = alloc::vec![0.0; logits.num_classes()];
    softmax_unclamped_into(logits.as_slice(), &mut probs);
    clamp_mass(&mut probs, p_floor);
    ProbabilityVector { probs, p_floor }
}

/// Focal term `-(1 - p_t)^γ ln p_t` on a clamped probability.
#[inline]
pub(crate) fn focal_term(p_t: f64, gamma: f64) -> f64 {
    -(libm::pow(1.0 - p_t, gamma) * libm::log(p_t))
}

/// `Σ_k α_k (-p_k ln p_k)`.
#[inline]
pub(crate) fn weighted_entropy(p: &[f64], alpha: &[f64]) -> f64 {
    p.iter().zip(alpha).map(|(&pk, &ak)| ak * -(pk * libm::log(pk))).sum()
}

/// `(focal part, entropy part)` of one sample under `loss`, on clamped `p`.
pub(crate) fn sample_terms(loss: LossId, p: &[f64], target: usize, alpha: &[f64], config: &LossConfig) -> (f64, f64) {
    match loss {
        LossId::Cce => (-libm::log(p[target]), 0.0),
        LossId::Focal => (focal_term(p[target], config.gamma), 0.0),
        LossId::Ahfe => (
            alpha[target] * focal_term(p[target], config.gamma),
            config.lambda * weighted_entropy(p, alpha),
        ),
    }
}

pub fn cce_per_sample(p: &ProbabilityVector, y: OneHotLabel) -> Result<f64> {
    let t = y.check(p.num_classes())?;
    Ok(-libm::log(p.probs[t]))
}

pub fn focal_per_sample(p: &ProbabilityVector, y: OneHotLabel, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let t = y.check(p.num_classes())?;
    Ok(focal_term(p.probs[t], gamma))
}

pub fn entropy_per_sample(p: &ProbabilityVector) -> f64 {
    -p.probs.iter().map(|&pk| pk * libm::log(pk)).sum::<f64>()
}

/// Class weights from per-class sample counts of the training split.
pub fn adaptive_weights(counts: &[usize], config: &LossConfig) -> Result<ClassWeights> {
    config.validate()?;
    if counts.len() < 2 {
        return Err(Error::input("class weights need at least 2 classes"));
    }
    if counts.iter().all(|&c| c == 0) && config.epsilon < MIN_EPSILON_FOR_EMPTY {
        return Err(Error::config("all class counts are zero and epsilon is too small"));
    }
    let raw = || counts.iter().map(|&n| 1.0 / libm::sqrt(n as f64 + config.epsilon));
    let alpha: Vec<f64> = match config.weight_mode {
        WeightMode::Raw => raw().collect(),
        WeightMode::MeanNormalized => {
            let mean = raw().sum::<f64>() / counts.len() as f64;
            raw().map(|a| a / mean).collect()
        }
        WeightMode::Uniform => alloc::vec![1.0; counts.len()],
    };
    Ok(ClassWeights {
        alpha,
        source_counts: counts.to_vec(),
    })
}

pub fn ahfe_per_sample(
    p: &ProbabilityVector,
    y: OneHotLabel,
    alpha: &ClassWeights,
    config: &LossConfig,
) -> Result<f64> {
    config.validate()?;
    let t = y.check(p.num_classes())?;
    if alpha.num_classes() != p.num_classes() {
        return Err(Error::input(alloc::format!(
            "{} class weights for {} classes",
            alpha.num_classes(),
            p.num_classes()
        )));
    }
    let (focal, entropy) = sample_terms(LossId::Ahfe, &p.probs, t, &alpha.alpha, config);
    Ok(focal + entropy)
}

fn check_batch(p: &[ProbabilityVector], y: &[OneHotLabel]) -> Result<usize> {
    if p.is_empty() {
        return Err(Error::input("empty batch"));
    }
    if p.len() != y.len() {
        return Err(Error::input(alloc::format!(
            "{} predictions but {} labels",
            p.len(),
            y.len()
        )));
    }
    let k = p[0].num_classes();
    if p.iter().any(|pv| pv.num_classes() != k) {
        return Err(Error::input("predictions disagree on the number of classes"));
    }
    for label in y {
        label.check(k)?;
    }
    Ok(k)
}

/// Sequential left-to-right reduction over the batch.
fn reduce_batch(
    loss: LossId,
    p: &[ProbabilityVector],
    y: &[OneHotLabel],
    alpha: &[f64],
    config: &LossConfig,
) -> BatchLossResult {
    let n = p.len() as f64;
    let mut per_sample = Vec::with_capacity(p.len());
    let (mut focal_sum, mut entropy_sum) = (0.0, 0.0);
    for (pv, label) in p.iter().zip(y) {
        let (focal, entropy) = sample_terms(loss, &pv.probs, label.class_index, alpha, config);
        focal_sum += focal;
        entropy_sum += entropy;
        per_sample.push(focal + entropy);
    }
    let total = per_sample.iter().sum::<f64>() / n;
    BatchLossResult {
        total,
        per_sample,
        focal_part: focal_sum / n,
        entropy_part: entropy_sum / n,
    }
}

pub fn cce_batch(p: &[ProbabilityVector], y: &[OneHotLabel]) -> Result<BatchLossResult> {
    check_batch(p, y)?;
    Ok(reduce_batch(LossId::Cce, p, y, &[], &LossConfig::default()))
}

pub fn focal_batch(p: &[ProbabilityVector], y: &[OneHotLabel], gamma: f64) -> Result<BatchLossResult> {
    check_gamma(gamma)?;
    check_batch(p, y)?;
    let config = LossConfig {
        gamma,
        ..LossConfig::default()
    };
    Ok(reduce_batch(LossId::Focal, p, y, &[], &config))
}

/// AHFE over a batch; `counts` are the training-split class counts, from
/// which the class weights are derived.
pub fn ahfe_batch(
    p: &[ProbabilityVector],
    y: &[OneHotLabel],
    counts: &[usize],
    config: &LossConfig,
) -> Result<BatchLossResult> {
    let weights = adaptive_weights(counts, config)?;
    ahfe_batch_weighted(p, y, &weights, config)
}

/// AHFE over a batch with precomputed class weights.
pub fn ahfe_batch_weighted(
    p: &[ProbabilityVector],
    y: &[OneHotLabel],
    weights: &ClassWeights,
    config: &LossConfig,
) -> Result<BatchLossResult> {
    config.validate()?;
    let k = check_batch(p, y)?;
    if weights.num_classes() != k {
        return Err(Error::input(alloc::format!(
            "{} class weights for {k} classes",
            weights.num_classes()
        )));
    }
    Ok(reduce_batch(LossId::Ahfe, p, y, &weights.alpha, config))
}
