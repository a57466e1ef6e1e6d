use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qgen::{QAPair, QTypePrior, QType};

/// Correct / total counts for one question type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TypeCount {
    pub correct: usize,
    pub total: usize,
}

/// Top-1 accuracies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub overall: f64,
    /// Accuracy per question type present in the split.
    pub per_type: BTreeMap<QType, f64>,
    /// Unweighted mean of `per_type`.
    pub average_over_types: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub counts: BTreeMap<QType, TypeCount>,
}

/// One scored question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub scene_id: String,
    pub question: String,
    pub qtype: QType,
    pub expected: String,
    pub predicted: Option<String>,
}

impl Prediction {
    pub fn correct(&self) -> bool {
        self.predicted.as_deref() == Some(self.expected.as_str())
    }
}

impl Metrics {
    pub fn from_predictions(preds: &[Prediction]) -> Result<Self> {
        if preds.is_empty() {
            return Err(Error::Empty("evaluation split"));
        }
        let mut counts: BTreeMap<QType, TypeCount> = BTreeMap::new();
        for p in preds {
            let c = counts.entry(p.qtype).or_default();
            c.total += 1;
            c.correct += usize::from(p.correct());
        }
        let correct: usize = counts.values().map(|c| c.correct).sum();
        let per_type: BTreeMap<QType, f64> =
            counts.iter().map(|(&t, c)| (t, c.correct as f64 / c.total as f64)).collect();
        let average_over_types = per_type.values().sum::<f64>() / per_type.len() as f64;
        Ok(Self { overall: correct as f64 / preds.len() as f64, per_type, average_over_types, counts })
    }

    /// Elementwise median over runs (mean of the middle pair for even counts).
    pub fn median(runs: &[Metrics]) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Empty("metric runs"));
        }
        let med = |mut xs: Vec<f64>| {
            xs.sort_by(f64::total_cmp);
            let n = xs.len();
            if n % 2 == 1 { xs[n / 2] } else { 0.5 * (xs[n / 2 - 1] + xs[n / 2]) }
        };
        let types: Vec<QType> = runs[0].per_type.keys().copied().collect();
        Ok(Self {
            overall: med(runs.iter().map(|m| m.overall).collect()),
            per_type: types
                .iter()
                .map(|t| (*t, med(runs.iter().map(|m| m.per_type.get(t).copied().unwrap_or(0.0)).collect())))
                .collect(),
            average_over_types: med(runs.iter().map(|m| m.average_over_types).collect()),
            counts: BTreeMap::new(),
        })
    }

    pub fn type_accuracy(&self, t: QType) -> f64 {
        self.per_type.get(&t).copied().unwrap_or(0.0)
    }
}

/// Scores an arbitrary answer function over a split.
pub fn evaluate_with(pairs: &[QAPair], mut predict: impl FnMut(&QAPair) -> Option<String>) -> Result<(Metrics, Vec<Prediction>)> {
    let preds: Vec<Prediction> = pairs
        .iter()
        .map(|p| Prediction {
            scene_id: p.scene_id.clone(),
            question: p.text(),
            qtype: p.qtype,
            expected: p.answer.clone(),
            predicted: predict(p),
        })
        .collect();
    Ok((Metrics::from_predictions(&preds)?, preds))
}

pub fn evaluate_prior(prior: &QTypePrior, pairs: &[QAPair]) -> Result<Metrics> {
    Ok(evaluate_with(pairs, |p| prior.predict(p.qtype).map(str::to_string))?.0)
}
