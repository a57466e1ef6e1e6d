use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::model::{AnswerPrediction, Dims, InputVariant, ModelConfig};

/// Run configuration read from TOML. Every key is optional:
///
/// ```toml
/// variant = "cube-tucker-diffusion"
/// answer_prediction = "fusion-aggregation"
/// use_location_feature = true
/// seeds = [0, 1, 2]
///
/// [dims]
/// grid = 4
///
/// [train]
/// epochs = 30
/// learning_rate = 0.001
/// batch_size = 32
///
/// [data]
/// n_scenes = 300
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub variant: InputVariant,
    pub answer_prediction: AnswerPrediction,
    /// Defaults to on for attention variants.
    pub use_location_feature: Option<bool>,
    pub seeds: Vec<u64>,
    pub dims: Dims,
    pub train: TrainConfig,
    pub data: DatasetConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: InputVariant::CubeTuckerDiffusion,
            answer_prediction: AnswerPrediction::FusionAggregation,
            use_location_feature: None,
            seeds: vec![0, 1, 2],
            dims: Dims::default(),
            train: TrainConfig::default(),
            data: DatasetConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("run config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("run config: {e}")))
    }

    /// Model configuration; vocabulary sizes are filled in by training.
    pub fn model_config(&self) -> Result<ModelConfig> {
        let config = ModelConfig {
            input_variant: self.variant,
            answer_prediction: self.answer_prediction,
            use_location_feature: self.use_location_feature.unwrap_or(self.variant.uses_attention()),
            dims: self.dims,
            vocab_size: 2,
            num_answers: 1,
        };
        config.validate()?;
        Ok(config)
    }
}
