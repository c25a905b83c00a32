//! Experiment configuration file (TOML).
//!
//! ```toml
//! output_dir = "runs/compare"
//! seeds = [1, 2, 3, 4, 5]
//! val_fraction = 0.2
//! stratified = true
//!
//! [dataset]            # `path = "data.csv"`, or blob settings:
//! classes = 5
//! dim = 2
//! proportions = [0.5, 0.1, 0.27, 0.05, 0.08]
//! total = 2000
//! spread = 1.0
//! separation = 2.0
//! seed = 0
//!
//! [model]
//! kind = "linear"      # or "mlp1"
//! hidden_dim = 16
//! activation = "relu"  # or "tanh"
//!
//! [train]
//! learning_rate = 0.1
//! momentum = 0.9
//! batch_size = 32
//! epochs = 128
//! shuffle = true
//!
//! [[losses]]
//! loss = "cce"
//!
//! [[losses]]
//! name = "ahfe"        # defaults to the loss id; used in file names
//! loss = "ahfe"
//! gamma = 2.0
//! lambda = 0.1
//! epsilon = 1e-8
//! weight_mode = "raw"  # raw | mean_normalized | uniform
//! p_floor = 1e-12
//! ```
//!
//! Every key is optional; missing keys take the defaults shown.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ahfe_core::data::{BlobSpec, DEFAULT_PROPORTIONS};
use ahfe_core::loss::{
    LossConfig, LossId, WeightMode, DEFAULT_EPSILON, DEFAULT_GAMMA, DEFAULT_LAMBDA, DEFAULT_P_FLOOR,
};
use ahfe_core::model::{Activation, ModelKind, ModelSpec};
use ahfe_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSettings {
    pub path: Option<PathBuf>,
    pub classes: usize,
    pub dim: usize,
    pub proportions: Vec<f64>,
    pub total: usize,
    pub spread: f64,
    pub separation: f64,
    pub seed: u64,
}

impl Default for DatasetSettings {
    fn default() -> Self {
        let spec = BlobSpec::default();
        DatasetSettings {
            path: None,
            classes: spec.num_classes,
            dim: spec.dim,
            proportions: DEFAULT_PROPORTIONS.to_vec(),
            total: spec.total,
            spread: spec.spread,
            separation: spec.separation,
            seed: spec.seed,
        }
    }
}

impl DatasetSettings {
    pub fn blob_spec(&self) -> BlobSpec {
        BlobSpec {
            num_classes: self.classes,
            dim: self.dim,
            proportions: self.proportions.clone(),
            total: self.total,
            spread: self.spread,
            separation: self.separation,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub kind: String,
    pub hidden_dim: usize,
    pub activation: String,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            kind: "linear".into(),
            hidden_dim: 16,
            activation: "relu".into(),
        }
    }
}

impl ModelSettings {
    pub fn resolve(&self, input_dim: usize, num_classes: usize) -> Result<ModelSpec> {
        let kind: ModelKind = self.kind.parse()?;
        let activation: Activation = self.activation.parse()?;
        let spec = match kind {
            ModelKind::Linear => ModelSpec::linear(input_dim, num_classes),
            ModelKind::Mlp1 => ModelSpec::mlp1(input_dim, self.hidden_dim, num_classes, activation),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub shuffle: bool,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSettings {
            learning_rate: d.learning_rate,
            momentum: d.momentum,
            batch_size: d.batch_size,
            epochs: d.epochs,
            shuffle: d.shuffle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSettings {
    pub name: Option<String>,
    pub loss: String,
    pub gamma: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub weight_mode: String,
    pub p_floor: f64,
}

impl Default for LossSettings {
    fn default() -> Self {
        LossSettings {
            name: None,
            loss: "ahfe".into(),
            gamma: DEFAULT_GAMMA,
            lambda: DEFAULT_LAMBDA,
            epsilon: DEFAULT_EPSILON,
            weight_mode: WeightMode::Raw.as_str().into(),
            p_floor: DEFAULT_P_FLOOR,
        }
    }
}

impl LossSettings {
    pub fn of(loss: LossId) -> Self {
        LossSettings {
            loss: loss.as_str().into(),
            ..LossSettings::default()
        }
    }

    pub fn resolve(&self) -> Result<ResolvedLoss> {
        let id: LossId = self.loss.parse()?;
        let config = LossConfig {
            gamma: self.gamma,
            lambda: self.lambda,
            epsilon: self.epsilon,
            weight_mode: self.weight_mode.parse()?,
            p_floor: self.p_floor,
        };
        config.validate()?;
        let name = self.name.clone().unwrap_or_else(|| id.as_str().to_string());
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(CliError::Config(format!(
                "loss name `{name}` must be non-empty and use only letters, digits, `_` or `-`"
            )));
        }
        Ok(ResolvedLoss { name, id, config })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedLoss {
    pub name: String,
    pub id: LossId,
    pub config: LossConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub val_fraction: f64,
    pub stratified: bool,
    pub dataset: DatasetSettings,
    pub model: ModelSettings,
    pub train: TrainSettings,
    pub losses: Vec<LossSettings>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            output_dir: PathBuf::from("runs"),
            seeds: (1..=10).collect(),
            val_fraction: 0.2,
            stratified: true,
            dataset: DatasetSettings::default(),
            model: ModelSettings::default(),
            train: TrainSettings::default(),
            losses: vec![LossSettings::of(LossId::Cce), LossSettings::of(LossId::Ahfe)],
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text, path)
    }

    /// Checks the list invariants: seeds non-empty and distinct, losses
    /// non-empty with distinct names. Returns the resolved losses.
    pub fn validate(&self) -> Result<Vec<ResolvedLoss>> {
        if self.seeds.is_empty() {
            return Err(CliError::Config("seeds must not be empty".into()));
        }
        let distinct: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return Err(CliError::Config("seeds must be distinct".into()));
        }
        if self.losses.is_empty() {
            return Err(CliError::Config("losses must not be empty".into()));
        }
        let resolved = self
            .losses
            .iter()
            .map(LossSettings::resolve)
            .collect::<Result<Vec<_>>>()?;
        let names: BTreeSet<&str> = resolved.iter().map(|l| l.name.as_str()).collect();
        if names.len() != resolved.len() {
            return Err(CliError::Config("loss names must be distinct".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(CliError::Config("val_fraction must lie in (0, 1)".into()));
        }
        Ok(resolved)
    }

    pub fn train_config(&self, loss: &ResolvedLoss, seed: u64) -> TrainConfig {
        TrainConfig {
            loss: loss.id,
            loss_config: loss.config,
            learning_rate: self.train.learning_rate,
            momentum: self.train.momentum,
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            seed,
            shuffle: self.train.shuffle,
        }
    }
}
