use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::qgen::Vocabulary;
use crate::tensor::StoredParam;

use super::{Model, ModelConfig};

/// Self-contained trained model: configuration, vocabulary and every
/// parameter as `{name, shape, values}` with row-major values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: Vec<StoredParam>,
}

impl Checkpoint {
    pub const FORMAT: &'static str = "panoqa-checkpoint-v1";

    pub fn new(model: &Model, vocab: &Vocabulary) -> Self {
        Self {
            format: Self::FORMAT.to_string(),
            config: model.config().clone(),
            vocab: vocab.clone(),
            params: model.store().to_stored(),
        }
    }

    pub fn model(&self) -> Result<Model> {
        let mut m = Model::new(self.config.clone(), 0)?;
        m.store_mut().load_stored(&self.params)?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut c: Checkpoint = io::read_json(path)?;
        if c.format != Self::FORMAT {
            return Err(Error::Config(format!("unknown checkpoint format `{}`", c.format)));
        }
        c.vocab = c.vocab.reindexed()?;
        if c.vocab.num_tokens() != c.config.vocab_size || c.vocab.num_answers() != c.config.num_answers {
            return Err(Error::Vocab("checkpoint vocabulary does not match its model configuration".into()));
        }
        Ok(c)
    }
}
