use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{DatasetSplits, Split};
use super::metrics::{evaluate_prior, Metrics};
use super::train::{evaluate, train, TrainConfig};
use crate::error::{Error, Result};
use crate::io;
use crate::model::{AnswerPrediction, Dims, InputVariant, ModelConfig};
use crate::qgen::{qtype_prior, QType};

/// One model configuration in an ablation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub label: String,
    pub input_variant: InputVariant,
    pub use_location_feature: bool,
    pub answer_prediction: AnswerPrediction,
}

impl VariantSpec {
    /// Default settings for `variant`: location feature on wherever attention is used.
    pub fn new(variant: InputVariant) -> Self {
        Self {
            label: variant.name().to_string(),
            input_variant: variant,
            use_location_feature: variant.uses_attention(),
            answer_prediction: AnswerPrediction::FusionAggregation,
        }
    }

    pub fn without_location(variant: InputVariant) -> Self {
        Self { label: format!("{} w/o location", variant.name()), use_location_feature: false, ..Self::new(variant) }
    }

    pub fn model_config(&self, dims: Dims) -> ModelConfig {
        ModelConfig {
            input_variant: self.input_variant,
            answer_prediction: self.answer_prediction,
            use_location_feature: self.use_location_feature,
            dims,
            vocab_size: 0,
            num_answers: 0,
        }
    }
}

/// Every input variant plus the without-location rows for the two attention models.
pub fn standard_variants() -> Vec<VariantSpec> {
    let mut v: Vec<VariantSpec> = InputVariant::ALL.iter().map(|&x| VariantSpec::new(x)).collect();
    v.push(VariantSpec::without_location(InputVariant::CubeTucker));
    v.push(VariantSpec::without_location(InputVariant::CubeTuckerDiffusion));
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    /// `None` for the question-type prior.
    pub variant: Option<VariantSpec>,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<Metrics>,
    pub median: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub split: Split,
    pub rows: Vec<AblationRow>,
}

pub const PRIOR_LABEL: &str = "q-type prior";

/// Trains every variant with every seed and reports test metrics with their
/// medians over seeds. The first row is always the question-type prior.
pub fn run_ablation(
    variants: &[VariantSpec],
    data: &DatasetSplits,
    dims: Dims,
    tc: &TrainConfig,
    seeds: &[u64],
) -> Result<AblationReport> {
    if seeds.is_empty() {
        return Err(Error::Config("ablation needs at least one seed".into()));
    }
    let test = data.split(Split::Test);
    let prior = evaluate_prior(&qtype_prior(data.split(Split::Train))?, test)?;
    let mut rows = vec![AblationRow {
        label: PRIOR_LABEL.to_string(),
        variant: None,
        seeds: Vec::new(),
        per_seed: vec![prior.clone()],
        median: prior,
    }];
    let jobs: Vec<(usize, u64)> = (0..variants.len()).flat_map(|v| seeds.iter().map(move |&s| (v, s))).collect();
    let results: Vec<Metrics> = jobs
        .par_iter()
        .map(|&(v, seed)| {
            let out = train(&variants[v].model_config(dims), data, &TrainConfig { seed, ..tc.clone() })?;
            evaluate(&out.checkpoint, data, Split::Test)
        })
        .collect::<Result<_>>()?;
    for (v, spec) in variants.iter().enumerate() {
        let per_seed: Vec<Metrics> = results[v * seeds.len()..(v + 1) * seeds.len()].to_vec();
        rows.push(AblationRow {
            label: spec.label.clone(),
            variant: Some(spec.clone()),
            seeds: seeds.to_vec(),
            median: Metrics::median(&per_seed)?,
            per_seed,
        });
    }
    Ok(AblationReport { split: Split::Test, rows })
}

impl AblationReport {
    pub fn row(&self, label: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Median accuracies in percent, one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,variant,location,prediction,seeds,overall");
        for t in QType::ALL {
            write!(out, ",{}", t.name()).unwrap();
        }
        out.push_str(",average\n");
        for r in &self.rows {
            let (variant, location, prediction) = match &r.variant {
                Some(v) => (
                    v.input_variant.name().to_string(),
                    v.use_location_feature.to_string(),
                    match v.answer_prediction {
                        AnswerPrediction::Aggregation => "aggregation",
                        AnswerPrediction::FusionAggregation => "fusion-aggregation",
                    }
                    .to_string(),
                ),
                None => ("prior".into(), String::new(), String::new()),
            };
            write!(out, "{},{variant},{location},{prediction},{},{:.2}", r.label, r.seeds.len(), 100.0 * r.median.overall).unwrap();
            for t in QType::ALL {
                write!(out, ",{:.2}", 100.0 * r.median.type_accuracy(t)).unwrap();
            }
            writeln!(out, ",{:.2}", 100.0 * r.median.average_over_types).unwrap();
        }
        out
    }

    /// Writes `ablation.csv` and `ablation.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        io::create_dir(dir)?;
        io::write_atomic(&dir.join("ablation.csv"), self.to_csv().as_bytes())?;
        io::write_json(&dir.join("ablation.json"), self)
    }
}
