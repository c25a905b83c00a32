//! Trained-model file: a TOML document holding the model shape, the
//! training configuration and seed, the frozen class weights, and the flat
//! parameter vector. Floats are written in shortest round-trip form, so
//! loading a saved model reproduces every parameter bit for bit.

use std::path::Path;

use ahfe_core::loss::LossConfig;
use ahfe_core::model::{Model, ModelSpec};
use ahfe_core::train::{TrainConfig, TrainedModel};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const MODEL_FORMAT: &str = "ahfe-model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecSection {
    pub kind: String,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub activation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub loss: String,
    pub gamma: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub weight_mode: String,
    pub p_floor: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub class_weights: Vec<f64>,
    pub parameters: Vec<f64>,
    pub spec: SpecSection,
    pub train: TrainSection,
}

impl ModelFile {
    pub fn from_trained(trained: &TrainedModel) -> Self {
        let s = trained.spec();
        let c = &trained.config;
        ModelFile {
            format: MODEL_FORMAT.into(),
            class_weights: trained.class_weights.alpha.clone(),
            parameters: trained.parameters().to_vec(),
            spec: SpecSection {
                kind: s.kind.as_str().into(),
                input_dim: s.input_dim,
                hidden_dim: s.hidden_dim,
                num_classes: s.num_classes,
                activation: s.activation.as_str().into(),
            },
            train: TrainSection {
                loss: c.loss.as_str().into(),
                gamma: c.loss_config.gamma,
                lambda: c.loss_config.lambda,
                epsilon: c.loss_config.epsilon,
                weight_mode: c.loss_config.weight_mode.as_str().into(),
                p_floor: c.loss_config.p_floor,
                learning_rate: c.learning_rate,
                momentum: c.momentum,
                batch_size: c.batch_size,
                epochs: c.epochs,
                seed: c.seed,
                shuffle: c.shuffle,
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model file is always representable as TOML")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ModelFile = toml::from_str(text).map_err(|e| CliError::Config(format!("model file: {e}")))?;
        if file.format != MODEL_FORMAT {
            return Err(CliError::Config(format!("unsupported model format `{}`", file.format)));
        }
        Ok(file)
    }

    pub fn model(&self) -> Result<Model> {
        let spec = ModelSpec {
            kind: self.spec.kind.parse()?,
            input_dim: self.spec.input_dim,
            hidden_dim: self.spec.hidden_dim,
            num_classes: self.spec.num_classes,
            activation: self.spec.activation.parse()?,
        };
        Ok(Model::new(spec, self.parameters.clone())?)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        Ok(TrainConfig {
            loss: t.loss.parse()?,
            loss_config: LossConfig {
                gamma: t.gamma,
                lambda: t.lambda,
                epsilon: t.epsilon,
                weight_mode: t.weight_mode.parse()?,
                p_floor: t.p_floor,
            },
            learning_rate: t.learning_rate,
            momentum: t.momentum,
            batch_size: t.batch_size,
            epochs: t.epochs,
            seed: t.seed,
            shuffle: t.shuffle,
        })
    }
}

pub fn save_model(path: &Path, trained: &TrainedModel) -> Result<()> {
    std::fs::write(path, ModelFile::from_trained(trained).to_toml()).map_err(|e| CliError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    ModelFile::from_toml(&text)
}
