use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{DatasetSplits, Split};
use super::metrics::{evaluate_with, Metrics, Prediction};
use crate::error::{Error, Result};
use crate::model::{argmax, prepare_input, Checkpoint, ForwardOptions, Model, ModelConfig, ModelInput};
use crate::qgen::{build_vocab, QAPair, Vocabulary};
use crate::tensor::{Adam, Graph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// Keep the epoch with the highest validation accuracy (earliest on ties).
    BestValidation,
    LastEpoch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub selection: Selection,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 30, learning_rate: 1e-3, batch_size: 32, seed: 0, selection: Selection::BestValidation }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("epochs, batch size and learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochLog>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

/// Model inputs keyed by scene id, prepared once per variant.
pub type InputCache = BTreeMap<String, ModelInput>;

pub fn prepare_inputs(data: &DatasetSplits, config: &ModelConfig) -> Result<InputCache> {
    data.scenes.par_iter().map(|(id, rec)| Ok((id.clone(), prepare_input(&rec.image, config)?))).collect()
}

/// One encoded training example.
#[derive(Debug, Clone)]
pub struct Sample<'a> {
    pub scene_id: &'a str,
    pub input: &'a ModelInput,
    pub tokens: Vec<usize>,
    pub class: usize,
}

pub fn encode_samples<'a>(pairs: &'a [QAPair], vocab: &Vocabulary, inputs: &'a InputCache) -> Result<Vec<Sample<'a>>> {
    pairs
        .iter()
        .map(|p| {
            let input = inputs.get(&p.scene_id).ok_or_else(|| Error::Config(format!("no input for scene `{}`", p.scene_id)))?;
            let class = vocab.answer_id(&p.answer).ok_or_else(|| Error::Vocab(format!("answer `{}` has no class", p.answer)))?;
            Ok(Sample { scene_id: &p.scene_id, input, tokens: vocab.encode(&p.question), class })
        })
        .collect()
}

/// Model plus optimizer state.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: Model,
    pub adam: Adam,
}

impl Trainer {
    pub fn new(model: Model, learning_rate: f64) -> Self {
        Self { model, adam: Adam { lr: learning_rate, ..Adam::default() } }
    }

    /// One Adam step on the mean cross-entropy of `batch`. Visual features
    /// are computed once per distinct scene in the batch.
    pub fn step(&mut self, batch: &[&Sample<'_>]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let mut g = Graph::new();
        let mut visuals = BTreeMap::new();
        let mut total = None;
        for s in batch {
            if !visuals.contains_key(s.scene_id) {
                visuals.insert(s.scene_id, self.model.visual(&mut g, s.input)?);
            }
            let fwd = self.model.answer(&mut g, &visuals[s.scene_id], &s.tokens, ForwardOptions::default())?;
            let ce = g.cross_entropy(fwd.logits, s.class)?;
            total = Some(match total {
                None => ce,
                Some(t) => g.add(t, ce)?,
            });
        }
        let loss = g.scale(total.expect("nonempty batch"), 1.0 / batch.len() as f64)?;
        let value = g.value(loss).data()[0];
        g.backward(loss)?;
        let store = self.model.store_mut();
        store.accumulate(&g);
        store.adam_step(&self.adam)?;
        Ok(value)
    }
}

/// Predicted answer strings for `pairs`; one graph per scene.
pub fn predict_answers(model: &Model, vocab: &Vocabulary, pairs: &[QAPair], inputs: &InputCache) -> Result<Vec<Option<String>>> {
    if vocab.num_tokens() != model.config().vocab_size || vocab.num_answers() != model.config().num_answers {
        return Err(Error::Vocab("vocabulary does not match the model".into()));
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in pairs.iter().enumerate() {
        groups.entry(p.scene_id.as_str()).or_default().push(i);
    }
    let groups: Vec<(&str, Vec<usize>)> = groups.into_iter().collect();
    let answered: Vec<Vec<(usize, Option<String>)>> = groups
        .par_iter()
        .map(|(scene, idx)| {
            let input = inputs.get(*scene).ok_or_else(|| Error::Config(format!("no input for scene `{scene}`")))?;
            let mut g = Graph::unchecked();
            let visual = model.visual(&mut g, input)?;
            idx.iter()
                .map(|&i| {
                    let tokens = vocab.encode(&pairs[i].question);
                    let fwd = model.answer(&mut g, &visual, &tokens, ForwardOptions::default())?;
                    let class = argmax(g.value(fwd.logits).data());
                    Ok((i, vocab.answer(class).map(str::to_string)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut out = vec![None; pairs.len()];
    for (i, a) in answered.into_iter().flatten() {
        out[i] = a;
    }
    Ok(out)
}

/// Top-1 metrics of a model on `pairs`; answers outside the vocabulary count as wrong.
pub fn evaluate_model(
    model: &Model,
    vocab: &Vocabulary,
    pairs: &[QAPair],
    inputs: &InputCache,
) -> Result<(Metrics, Vec<Prediction>)> {
    let answers = predict_answers(model, vocab, pairs, inputs)?;
    let mut it = answers.into_iter();
    evaluate_with(pairs, |_| it.next().flatten())
}

pub fn evaluate(checkpoint: &Checkpoint, data: &DatasetSplits, split: Split) -> Result<Metrics> {
    let model = checkpoint.model()?;
    let inputs = prepare_inputs(data, model.config())?;
    Ok(evaluate_model(&model, &checkpoint.vocab, data.split(split), &inputs)?.0)
}

/// Scene-grouped epoch order: scenes shuffled, questions shuffled within each scene.
fn epoch_order(samples: &[Sample<'_>], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut by_scene: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        by_scene.entry(s.scene_id).or_default().push(i);
    }
    let mut scenes: Vec<Vec<usize>> = by_scene.into_values().collect();
    scenes.shuffle(rng);
    for s in &mut scenes {
        s.shuffle(rng);
    }
    scenes.concat()
}

/// Trains with Adam on cross-entropy and keeps the parameters selected by
/// `tc.selection`, judged on validation overall accuracy after each epoch.
pub fn train(config: &ModelConfig, data: &DatasetSplits, tc: &TrainConfig) -> Result<TrainOutcome> {
    train_with_progress(config, data, tc, |_| {})
}

pub fn train_with_progress(
    config: &ModelConfig,
    data: &DatasetSplits,
    tc: &TrainConfig,
    mut progress: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    tc.validate()?;
    let vocab = build_vocab(data.split(Split::Train))?;
    let mut config = config.clone();
    config.vocab_size = vocab.num_tokens();
    config.num_answers = vocab.num_answers();
    let inputs = prepare_inputs(data, &config)?;
    let samples = encode_samples(data.split(Split::Train), &vocab, &inputs)?;
    if samples.is_empty() {
        return Err(Error::Empty("training split"));
    }
    let validation = data.split(Split::Validation);
    let mut trainer = Trainer::new(Model::new(config, tc.seed)?, tc.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed ^ 0x5eed_0f_0da7a);
    let mut history = Vec::with_capacity(tc.epochs);
    let mut best: Option<(f64, usize, Vec<crate::tensor::StoredParam>)> = None;
    for epoch in 1..=tc.epochs {
        let order = epoch_order(&samples, &mut rng);
        let mut loss_sum = 0.0;
        for (step, chunk) in order.chunks(tc.batch_size).enumerate() {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let loss = match trainer.step(&batch) {
                Ok(l) if l.is_finite() => l,
                Ok(l) => return Err(Error::Divergence { epoch, step, loss: l }),
                Err(Error::NonFinite { .. }) => return Err(Error::Divergence { epoch, step, loss: f64::NAN }),
                Err(e) => return Err(e),
            };
            loss_sum += loss * chunk.len() as f64;
        }
        let val = if validation.is_empty() {
            0.0
        } else {
            evaluate_model(&trainer.model, &vocab, validation, &inputs)?.0.overall
        };
        let log = EpochLog { epoch, train_loss: loss_sum / samples.len() as f64, validation: val };
        progress(&log);
        history.push(log);
        let keep = match (tc.selection, &best) {
            (Selection::LastEpoch, _) | (_, None) => true,
            (Selection::BestValidation, Some((b, _, _))) => val > *b,
        };
        if keep {
            best = Some((val, epoch, trainer.model.store().to_stored()));
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    trainer.model.store_mut().load_stored(&params)?;
    Ok(TrainOutcome { checkpoint: Checkpoint::new(&trainer.model, &vocab), history, best_epoch })
}
