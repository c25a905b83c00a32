//! Small softmax classifiers over a flat parameter vector.
//!
//! Parameter layout (row-major matrices):
//!
//! - linear: `W (K × d)`, then `b (K)`
//! - mlp1:   `W1 (H × d)`, `b1 (H)`, `W2 (K × H)`, `b2 (K)`

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::loss::{argmax, softmax_with_floor, LogitVector, ProbabilityVector, DEFAULT_P_FLOOR};
use crate::rng::{streams, CounterRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Linear,
    Mlp1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

macro_rules! str_enum {
    ($ty:ty, $what:literal, $($variant:path => $name:literal),+ $(,)?) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(Error::config(alloc::format!(concat!("unknown ", $what, " `{}`"), other))),
                }
            }
        }
    };
}

str_enum!(ModelKind, "model kind", ModelKind::Linear => "linear", ModelKind::Mlp1 => "mlp1");
str_enum!(Activation, "activation", Activation::Relu => "relu", Activation::Tanh => "tanh");

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => libm::tanh(x),
        }
    }

    /// Derivative given the pre-activation `x` and activation `y`.
    #[inline]
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    /// Ignored for linear models.
    pub hidden_dim: usize,
    pub num_classes: usize,
    /// Ignored for linear models.
    pub activation: Activation,
}

impl ModelSpec {
    pub fn linear(input_dim: usize, num_classes: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Linear,
            input_dim,
            hidden_dim: 0,
            num_classes,
            activation: Activation::Relu,
        }
    }

    pub fn mlp1(input_dim: usize, hidden_dim: usize, num_classes: usize, activation: Activation) -> Self {
        ModelSpec {
            kind: ModelKind::Mlp1,
            input_dim,
            hidden_dim,
            num_classes,
            activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("input_dim must be at least 1"));
        }
        if self.num_classes < 2 {
            return Err(Error::config("num_classes must be at least 2"));
        }
        if self.kind == ModelKind::Mlp1 && self.hidden_dim == 0 {
            return Err(Error::config("hidden_dim must be at least 1"));
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        let (d, h, k) = (self.input_dim, self.hidden_dim, self.num_classes);
        match self.kind {
            ModelKind::Linear => d * k + k,
            ModelKind::Mlp1 => d * h + h + h * k + k,
        }
    }

    /// Width of the scratch buffer needed by forward/backward.
    fn hidden_width(&self) -> usize {
        match self.kind {
            ModelKind::Linear => 0,
            ModelKind::Mlp1 => self.hidden_dim,
        }
    }
}

/// Xavier-uniform weights `U(-b, b)`, `b = sqrt(6 / (fan_in + fan_out))`,
/// drawn in layout order; biases are zero.
pub fn init_parameters(spec: &ModelSpec, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut rng = CounterRng::new(seed, streams::INIT);
    let mut params = Vec::with_capacity(spec.parameter_count());
    let mut layer = |params: &mut Vec<f64>, fan_in: usize, fan_out: usize| {
        let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        params.extend((0..fan_in * fan_out).map(|_| rng.uniform(-bound, bound)));
        params.extend(core::iter::repeat_n(0.0, fan_out));
    };
    match spec.kind {
        ModelKind::Linear => layer(&mut params, spec.input_dim, spec.num_classes),
        ModelKind::Mlp1 => {
            layer(&mut params, spec.input_dim, spec.hidden_dim);
            layer(&mut params, spec.hidden_dim, spec.num_classes);
        }
    }
    Ok(params)
}

/// `out = W x + b` for `W` with `out.len()` rows.
#[inline]
fn affine(weights: &[f64], bias: &[f64], x: &[f64], out: &mut [f64]) {
    for ((o, row), &b) in out.iter_mut().zip(weights.chunks_exact(x.len())).zip(bias) {
        *o = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b;
    }
}

/// Reusable buffers for one forward/backward pass.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    dhidden: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub parameters: Vec<f64>,
}

impl Model {
    pub fn new(spec: ModelSpec, parameters: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if parameters.len() != spec.parameter_count() {
            return Err(Error::input(alloc::format!(
                "{} parameters for a model that needs {}",
                parameters.len(),
                spec.parameter_count()
            )));
        }
        if parameters.iter().any(|p| !p.is_finite()) {
            return Err(Error::input("model parameters must be finite"));
        }
        Ok(Model { spec, parameters })
    }

    pub fn initialized(spec: ModelSpec, seed: u64) -> Result<Self> {
        let parameters = init_parameters(&spec, seed)?;
        Ok(Model { spec, parameters })
    }

    pub fn workspace(&self) -> Workspace {
        let h = self.spec.hidden_width();
        Workspace {
            pre: alloc::vec![0.0; h],
            hidden: alloc::vec![0.0; h],
            dhidden: alloc::vec![0.0; h],
        }
    }

    fn check_features(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.input_dim {
            return Err(Error::input(alloc::format!(
                "expected {} features, got {}",
                self.spec.input_dim,
                x.len()
            )));
        }
        Ok(())
    }

    /// Logits into `out` (length K), without input validation.
    pub(crate) fn forward_into(&self, x: &[f64], ws: &mut Workspace, out: &mut [f64]) {
        let (d, k) = (self.spec.input_dim, self.spec.num_classes);
        let p = &self.parameters;
        match self.spec.kind {
            ModelKind::Linear => affine(&p[..d * k], &p[d * k..], x, out),
            ModelKind::Mlp1 => {
                let h = self.spec.hidden_dim;
                let (w1, rest) = p.split_at(h * d);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(k * h);
                affine(w1, b1, x, &mut ws.pre);
                for (y, &a) in ws.hidden.iter_mut().zip(&ws.pre) {
                    *y = self.spec.activation.apply(a);
                }
                affine(w2, b2, &ws.hidden, out);
            }
        }
    }

    /// Adds `∂L/∂θ` to `grad` given `∂L/∂logits` for input `x`. Must follow
    /// a [`forward_into`](Self::forward_into) on the same `x` and workspace.
    pub(crate) fn backward_into(&self, x: &[f64], dlogits: &[f64], ws: &mut Workspace, grad: &mut [f64]) {
        let (d, k) = (self.spec.input_dim, self.spec.num_classes);
        match self.spec.kind {
            ModelKind::Linear => {
                let (gw, gb) = grad.split_at_mut(d * k);
                for ((row, b), &dz) in gw.chunks_exact_mut(d).zip(gb.iter_mut()).zip(dlogits) {
                    for (g, &xi) in row.iter_mut().zip(x) {
                        *g += dz * xi;
                    }
                    *b += dz;
                }
            }
            ModelKind::Mlp1 => {
                let h = self.spec.hidden_dim;
                let w2 = &self.parameters[h * d + h..h * d + h + k * h];
                let (gw1, rest) = grad.split_at_mut(h * d);
                let (gb1, rest) = rest.split_at_mut(h);
                let (gw2, gb2) = rest.split_at_mut(k * h);
                ws.dhidden.iter_mut().for_each(|v| *v = 0.0);
                for (((row, grow), b), &dz) in w2
                    .chunks_exact(h)
                    .zip(gw2.chunks_exact_mut(h))
                    .zip(gb2.iter_mut())
                    .zip(dlogits)
                {
                    for ((g, &hv), (dh, &w)) in grow.iter_mut().zip(&ws.hidden).zip(ws.dhidden.iter_mut().zip(row)) {
                        *g += dz * hv;
                        *dh += dz * w;
                    }
                    *b += dz;
                }
                for j in 0..h {
                    let da = ws.dhidden[j] * self.spec.activation.derivative(ws.pre[j], ws.hidden[j]);
                    for (g, &xi) in gw1[j * d..(j + 1) * d].iter_mut().zip(x) {
                        *g += da * xi;
                    }
                    gb1[j] += da;
                }
            }
        }
    }

    pub fn forward(&self, features: &[f64]) -> Result<LogitVector> {
        self.check_features(features)?;
        let mut out = alloc::vec![0.0; self.spec.num_classes];
        self.forward_into(features, &mut self.workspace(), &mut out);
        LogitVector::new(out)
    }

    /// Most probable class (ties toward the lowest index) and the clamped
    /// softmax probabilities.
    pub fn predict(&self, features: &[f64]) -> Result<(usize, ProbabilityVector)> {
        let probs = softmax_with_floor(&self.forward(features)?, DEFAULT_P_FLOOR);
        Ok((argmax(probs.as_slice()), probs))
    }
}
