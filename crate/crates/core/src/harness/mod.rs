//! Experimental protocol: dataset assembly, training, evaluation, ablations
//! and attention figures.

mod ablation;
mod config;
mod dataset;
mod figures;
mod metrics;
mod train;

pub use self::ablation::{run_ablation, standard_variants, AblationReport, AblationRow, VariantSpec, PRIOR_LABEL};
pub use self::config::RunConfig;
pub use self::dataset::{build_dataset, image_path, scene_seed, split_sizes, DatasetConfig, DatasetSplits, SceneRecord, Split};
pub use self::figures::{ask, emit_attention_figures, AttentionSidecar};
pub use self::metrics::{evaluate_prior, evaluate_with, Metrics, Prediction, TypeCount};
pub use self::train::{
    encode_samples, evaluate, evaluate_model, predict_answers, prepare_inputs, train, train_with_progress, EpochLog, InputCache,
    Sample, Selection, TrainConfig, TrainOutcome, Trainer,
};
