//! Analytic gradients of the losses with respect to the logits, and a seeded
//! central-difference checker.
//!
//! All three losses are functions of `p = softmax(z)`, whose Jacobian is
//! `∂p_k/∂z_j = p_k (δ_kj - p_j)`. Chaining gives, per sample with true
//! class `t` and `q = 1 - p_t`:
//!
//! ```text
//! CCE      ∂/∂z_j = p_j - δ_tj
//! focal    ∂/∂z_j = c (δ_tj - p_j),   c = γ q^(γ-1) p_t ln p_t - q^γ
//! entropy  E = Σ_k α_k (-p_k ln p_k),  s_k = α_k (p_k ln p_k + p_k)
//!          ∂E/∂z_j = p_j Σ_k s_k - s_j
//! AHFE     α_t · focal + λ · entropy
//! ```
//!
//! At `γ = 0` the focal coefficient is exactly `-1`, which reproduces the
//! CCE gradient bit for bit. Gradients are taken through the unclamped
//! softmax; the probability clamp is treated as a pass-through. The full
//! derivation is in `docs/gradients.md`.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::loss::{
    adaptive_weights, clamp_mass, sample_terms, softmax_unclamped_into, ClassWeights, LogitVector, LossConfig, LossId,
    OneHotLabel, WeightMode,
};
use crate::rng::{streams, CounterRng};

/// Central-difference step on the logits.
pub const FD_STEP: f64 = 1e-5;
/// Relative-error threshold the checker is expected to meet.
pub const FD_TOLERANCE: f64 = 1e-4;
/// γ values sampled by [`finite_difference_check`].
pub const CHECK_GAMMAS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 5.0];
/// λ values sampled by [`finite_difference_check`].
pub const CHECK_LAMBDAS: [f64; 4] = [-0.5, 0.0, 0.1, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    pub dloss_dlogits: Vec<f64>,
}

impl GradientVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.dloss_dlogits
    }

    pub fn sum(&self) -> f64 {
        self.dloss_dlogits.iter().sum()
    }
}

/// `x ln x`, continuously extended with `0 ln 0 = 0`.
#[inline]
fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * libm::log(x)
    } else {
        0.0
    }
}

#[inline]
fn focal_coefficient(p_t: f64, gamma: f64) -> f64 {
    let q = 1.0 - p_t;
    let slope = if gamma == 0.0 || q == 0.0 {
        0.0
    } else {
        gamma * libm::pow(q, gamma - 1.0) * xlnx(p_t)
    };
    slope - libm::pow(q, gamma)
}

/// Writes `scale · ∂focal/∂z` into `out`.
#[inline]
fn focal_grad_into(p: &[f64], target: usize, gamma: f64, scale: f64, out: &mut [f64]) {
    let c = scale * focal_coefficient(p[target], gamma);
    for (j, (o, &pj)) in out.iter_mut().zip(p).enumerate() {
        let delta = if j == target { 1.0 } else { 0.0 };
        *o = c * (delta - pj);
    }
}

/// Adds `scale · ∂E/∂z` to `out`, where `E` is the α-weighted entropy.
#[inline]
fn add_entropy_grad(p: &[f64], alpha: &[f64], scale: f64, out: &mut [f64]) {
    let s_total: f64 = p.iter().zip(alpha).map(|(&pk, &ak)| ak * (xlnx(pk) + pk)).sum();
    for ((o, &pj), &aj) in out.iter_mut().zip(p).zip(alpha) {
        let s_j = aj * (xlnx(pj) + pj);
        *o += scale * (pj * s_total - s_j);
    }
}

/// Per-sample loss gradient with respect to the logits, from the unclamped
/// softmax output `p`.
pub(crate) fn logit_grad_into(
    loss: LossId,
    p: &[f64],
    target: usize,
    alpha: &[f64],
    config: &LossConfig,
    out: &mut [f64],
) {
    match loss {
        LossId::Cce => {
            for (j, (o, &pj)) in out.iter_mut().zip(p).enumerate() {
                *o = if j == target { pj - 1.0 } else { pj };
            }
        }
        LossId::Focal => focal_grad_into(p, target, config.gamma, 1.0, out),
        LossId::Ahfe => {
            focal_grad_into(p, target, config.gamma, alpha[target], out);
            if config.lambda != 0.0 {
                add_entropy_grad(p, alpha, config.lambda, out);
            }
        }
    }
}

fn unclamped(logits: &LogitVector) -> Vec<f64> {
    let mut p = alloc::vec![0.0; logits.num_classes()];
    softmax_unclamped_into(logits.as_slice(), &mut p);
    p
}

pub fn cce_grad(logits: &LogitVector, y: OneHotLabel) -> Result<GradientVector> {
    let t = y.check(logits.num_classes())?;
    let p = unclamped(logits);
    let mut out = alloc::vec![0.0; p.len()];
    logit_grad_into(LossId::Cce, &p, t, &[], &LossConfig::default(), &mut out);
    Ok(GradientVector { dloss_dlogits: out })
}

pub fn focal_grad(logits: &LogitVector, y: OneHotLabel, gamma: f64) -> Result<GradientVector> {
    let config = LossConfig {
        gamma,
        ..LossConfig::default()
    };
    config.validate()?;
    let t = y.check(logits.num_classes())?;
    let p = unclamped(logits);
    let mut out = alloc::vec![0.0; p.len()];
    logit_grad_into(LossId::Focal, &p, t, &[], &config, &mut out);
    Ok(GradientVector { dloss_dlogits: out })
}

fn check_weights(logits: &LogitVector, alpha: &ClassWeights) -> Result<()> {
    if alpha.num_classes() == logits.num_classes() {
        Ok(())
    } else {
        Err(Error::input(alloc::format!(
            "{} class weights for {} classes",
            alpha.num_classes(),
            logits.num_classes()
        )))
    }
}

pub fn ahfe_grad(
    logits: &LogitVector,
    y: OneHotLabel,
    alpha: &ClassWeights,
    config: &LossConfig,
) -> Result<GradientVector> {
    config.validate()?;
    check_weights(logits, alpha)?;
    let t = y.check(logits.num_classes())?;
    let p = unclamped(logits);
    let mut out = alloc::vec![0.0; p.len()];
    logit_grad_into(LossId::Ahfe, &p, t, &alpha.alpha, config, &mut out);
    Ok(GradientVector { dloss_dlogits: out })
}

/// The two pieces of the AHFE gradient: the α_t-scaled focal part and the
/// unscaled weighted-entropy part. The full gradient is `focal + λ·entropy`.
pub fn ahfe_grad_parts(
    logits: &LogitVector,
    y: OneHotLabel,
    alpha: &ClassWeights,
    config: &LossConfig,
) -> Result<(GradientVector, GradientVector)> {
    config.validate()?;
    check_weights(logits, alpha)?;
    let t = y.check(logits.num_classes())?;
    let p = unclamped(logits);
    let mut focal = alloc::vec![0.0; p.len()];
    focal_grad_into(&p, t, config.gamma, alpha.alpha[t], &mut focal);
    let mut entropy = alloc::vec![0.0; p.len()];
    add_entropy_grad(&p, &alpha.alpha, 1.0, &mut entropy);
    Ok((
        GradientVector { dloss_dlogits: focal },
        GradientVector { dloss_dlogits: entropy },
    ))
}

/// Dispatches to the gradient of `loss`; `alpha` and `config` are ignored
/// where the loss does not use them.
pub fn loss_grad(
    loss: LossId,
    logits: &LogitVector,
    y: OneHotLabel,
    alpha: &ClassWeights,
    config: &LossConfig,
) -> Result<GradientVector> {
    match loss {
        LossId::Cce => cce_grad(logits, y),
        LossId::Focal => focal_grad(logits, y, config.gamma),
        LossId::Ahfe => ahfe_grad(logits, y, alpha, config),
    }
}

/// Per-sample loss evaluated from logits through the clamped softmax.
pub fn loss_from_logits(loss: LossId, logits: &[f64], target: usize, alpha: &[f64], config: &LossConfig) -> f64 {
    let mut p = alloc::vec![0.0; logits.len()];
    softmax_unclamped_into(logits, &mut p);
    clamp_mass(&mut p, config.p_floor);
    let (focal, entropy) = sample_terms(loss, &p, target, alpha, config);
    focal + entropy
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn central_difference<F>(f: F, point: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut x = point.to_vec();
    (0..point.len())
        .map(|i| {
            x[i] = point[i] + h;
            let plus = f(&x);
            x[i] = point[i] - h;
            let minus = f(&x);
            x[i] = point[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// `|analytic - numeric| / max(1e-8, |numeric|)`.
#[inline]
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(1e-8)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckCase {
    pub logits: Vec<f64>,
    pub label: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub loss: LossId,
    pub seed: u64,
    pub num_cases: usize,
    /// Cases dropped because a probability touched the clamp bounds.
    pub skipped: usize,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    pub worst_case: Option<GradCheckCase>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < FD_TOLERANCE
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, values: &[f64]) -> fmt::Result {
    f.write_str("[")?;
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{v:?}")?;
    }
    f.write_str("]")
}

/// `key: value` lines.
impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "loss: {}", self.loss)?;
        writeln!(f, "seed: {}", self.seed)?;
        writeln!(f, "num_cases: {}", self.num_cases)?;
        writeln!(f, "skipped: {}", self.skipped)?;
        writeln!(f, "step: {FD_STEP:e}")?;
        writeln!(f, "max_abs_error: {:e}", self.max_abs_error)?;
        writeln!(f, "max_rel_error: {:e}", self.max_rel_error)?;
        if let Some(case) = &self.worst_case {
            f.write_str("worst_logits: ")?;
            write_list(f, &case.logits)?;
            writeln!(f)?;
            writeln!(f, "worst_label: {}", case.label)?;
            writeln!(f, "worst_gamma: {:?}", case.gamma)?;
            writeln!(f, "worst_lambda: {:?}", case.lambda)?;
            f.write_str("worst_alpha: ")?;
            write_list(f, &case.alpha)?;
            writeln!(f)?;
        }
        writeln!(f, "tolerance: {FD_TOLERANCE:e}")?;
        writeln!(f, "pass: {}", self.passed())
    }
}

/// Compares analytic and central-difference gradients on `num_cases`
/// random cases: 2–6 classes, logits uniform in `[-4, 4]`, γ and λ drawn
/// from [`CHECK_GAMMAS`] / [`CHECK_LAMBDAS`], and raw class weights from
/// random counts in `[1, 1000]`.
pub fn finite_difference_check(loss: LossId, num_cases: usize, seed: u64) -> Result<GradCheckReport> {
    if num_cases == 0 {
        return Err(Error::input("num_cases must be at least 1"));
    }
    let mut rng = CounterRng::new(seed, streams::GRADCHECK);
    let mut report = GradCheckReport {
        loss,
        seed,
        num_cases,
        skipped: 0,
        max_abs_error: 0.0,
        max_rel_error: 0.0,
        worst_case: None,
    };
    let mut p = Vec::new();
    let mut analytic = Vec::new();
    for _ in 0..num_cases {
        let k = 2 + rng.below(5) as usize;
        let logits: Vec<f64> = (0..k).map(|_| rng.uniform(-4.0, 4.0)).collect();
        let label = rng.below(k as u64) as usize;
        let gamma = CHECK_GAMMAS[rng.below(CHECK_GAMMAS.len() as u64) as usize];
        let lambda = CHECK_LAMBDAS[rng.below(CHECK_LAMBDAS.len() as u64) as usize];
        let counts: Vec<usize> = (0..k).map(|_| 1 + rng.below(1000) as usize).collect();
        let config = LossConfig {
            gamma,
            lambda,
            weight_mode: WeightMode::Raw,
            ..LossConfig::default()
        };
        let alpha = adaptive_weights(&counts, &config)?.alpha;

        p.resize(k, 0.0);
        softmax_unclamped_into(&logits, &mut p);
        let floor = config.p_floor;
        if p.iter().any(|&x| x <= floor || x >= 1.0 - floor) {
            report.skipped += 1;
            continue;
        }

        analytic.resize(k, 0.0);
        logit_grad_into(loss, &p, label, &alpha, &config, &mut analytic);
        let numeric = central_difference(|z| loss_from_logits(loss, z, label, &alpha, &config), &logits, FD_STEP);
        let mut case_rel = 0.0f64;
        for (&a, &n) in analytic.iter().zip(&numeric) {
            report.max_abs_error = report.max_abs_error.max((a - n).abs());
            case_rel = case_rel.max(relative_error(a, n));
        }
        if report.worst_case.is_none() || case_rel > report.max_rel_error {
            report.max_rel_error = report.max_rel_error.max(case_rel);
            report.worst_case = Some(GradCheckCase {
                logits,
                label,
                gamma,
                lambda,
                alpha,
            });
        }
    }
    Ok(report)
}
