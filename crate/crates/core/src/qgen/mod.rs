//! Template questions with machine-checked answers, answer balancing, the
//! answer vocabulary and the per-type prior baseline.

mod question;

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Direction;
use crate::synth::SceneSpec;

pub use self::question::{
    enumerate_questions, evaluate_question, parse_question, tokenize, Attribute, Evaluation, Qualifier, Question,
    Referent,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QType {
    Scene,
    Exist,
    Counting,
    Property,
    Spatial,
}

impl QType {
    pub const ALL: [QType; 5] = [QType::Scene, QType::Exist, QType::Counting, QType::Property, QType::Spatial];

    pub fn name(self) -> &'static str {
        match self {
            QType::Scene => "scene",
            QType::Exist => "exist",
            QType::Counting => "counting",
            QType::Property => "property",
            QType::Spatial => "spatial",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Region of the sphere the answer is grounded in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetRegion {
    pub lonlat: [f64; 2],
    pub size: f64,
}

impl TargetRegion {
    pub fn direction(&self) -> Direction {
        Direction { lon: self.lonlat[0], lat: self.lonlat[1] }
    }
}

mod question_text {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(tokens: &[String], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&tokens.join(" ").replace(" ?", "?"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<String>, D::Error> {
        Ok(super::tokenize(&String::deserialize(de)?))
    }
}

/// One generated question with its answer. Serialized as one JSONL record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAPair {
    pub scene_id: String,
    pub image_path: String,
    #[serde(with = "question_text")]
    pub question: Vec<String>,
    pub answer: String,
    pub qtype: QType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_region: Option<TargetRegion>,
}

impl QAPair {
    pub fn text(&self) -> String {
        self.question.join(" ").replace(" ?", "?")
    }
}

/// Questions requested per scene, by type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Quota {
    pub scene: usize,
    pub exist: usize,
    pub counting: usize,
    pub property: usize,
    pub spatial: usize,
}

impl Default for Quota {
    fn default() -> Self {
        Self { scene: 1, exist: 3, counting: 3, property: 3, spatial: 3 }
    }
}

impl Quota {
    pub fn get(&self, t: QType) -> usize {
        match t {
            QType::Scene => self.scene,
            QType::Exist => self.exist,
            QType::Counting => self.counting,
            QType::Property => self.property,
            QType::Spatial => self.spatial,
        }
    }

    pub fn total(&self) -> usize {
        QType::ALL.iter().map(|t| self.get(*t)).sum()
    }
}

/// Canonical scene identifier used in corpora.
pub fn scene_id(seed: u64) -> String {
    format!("scene_{seed:06}")
}

/// Generates up to `quota` well-posed questions about `spec`.
///
/// For each type the answer is drawn first, uniformly among the answers that
/// some well-posed question of that type admits, then a question with that
/// answer; this keeps per-scene answer frequencies flat before balancing.
/// Returns the pairs and a warning for every type whose quota could not be met.
pub fn generate_questions(
    spec: &SceneSpec,
    image_path: &str,
    seed: u64,
    quota: &Quota,
) -> (Vec<QAPair>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ spec.seed.rotate_left(32));
    let mut by_type: BTreeMap<QType, BTreeMap<String, Vec<(Question, Evaluation)>>> = BTreeMap::new();
    for q in enumerate_questions(spec) {
        if let Ok(ev) = evaluate_question(&q, spec) {
            by_type.entry(q.qtype()).or_default().entry(ev.answer.clone()).or_default().push((q, ev));
        }
    }
    let mut pairs = Vec::new();
    let mut warnings = Vec::new();
    for t in QType::ALL {
        let want = quota.get(t);
        let mut pools = by_type.remove(&t).unwrap_or_default();
        let mut got = 0;
        while got < want {
            let answers: Vec<String> = pools.iter().filter(|(_, v)| !v.is_empty()).map(|(k, _)| k.clone()).collect();
            let Some(answer) = answers.choose(&mut rng) else { break };
            let pool = pools.get_mut(answer).expect("answer pool");
            let k = rng.gen_range(0..pool.len());
            let (q, ev) = pool.swap_remove(k);
            pairs.push(QAPair {
                scene_id: scene_id(spec.seed),
                image_path: image_path.to_string(),
                question: q.tokens(),
                answer: ev.answer,
                qtype: t,
                target_region: ev
                    .focus
                    .map(|o| TargetRegion { lonlat: [o.center.lon, o.center.lat], size: o.angular_size }),
            });
            got += 1;
        }
        if got < want {
            warnings.push(format!("{}: only {got} of {want} {} questions available", scene_id(spec.seed), t.name()));
        }
    }
    (pairs, warnings)
}

/// Fraction of the most frequent answer above which an answer is balanced
/// down to the rarest such answer.
const MAJOR_FRACTION: f64 = 0.4;

/// Subsamples each question type so that its frequent answers occur equally
/// often. Answers rarer than 40% of the type's most frequent answer are kept
/// whole; every other answer is capped at the count of the rarest of them.
/// Surviving pairs keep their original order.
pub fn balance_answers(pairs: &[QAPair], seed: u64) -> Vec<QAPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; pairs.len()];
    for t in QType::ALL {
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, p) in pairs.iter().enumerate().filter(|(_, p)| p.qtype == t) {
            groups.entry(p.answer.as_str()).or_default().push(i);
        }
        let Some(max) = groups.values().map(Vec::len).max() else { continue };
        let cap = groups
            .values()
            .map(Vec::len)
            .filter(|&n| n as f64 >= MAJOR_FRACTION * max as f64)
            .min()
            .unwrap_or(max);
        for idx in groups.values_mut() {
            idx.shuffle(&mut rng);
            for &i in idx.iter().take(cap) {
                keep[i] = true;
            }
        }
    }
    pairs.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| p.clone()).collect()
}

pub const PAD: usize = 0;
pub const UNK: usize = 1;

/// Question-token and answer-class maps built from training pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub tokens: Vec<String>,
    pub answers: Vec<String>,
    #[serde(skip)]
    token_index: HashMap<String, usize>,
    #[serde(skip)]
    answer_index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>, answers: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[PAD] != "<pad>" || tokens[UNK] != "<unk>" {
            return Err(Error::Vocab("token list must start with <pad>, <unk>".into()));
        }
        if answers.is_empty() {
            return Err(Error::Vocab("no answer classes".into()));
        }
        let token_index: HashMap<String, usize> = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let answer_index: HashMap<String, usize> = answers.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        if token_index.len() != tokens.len() || answer_index.len() != answers.len() {
            return Err(Error::Vocab("duplicate entries".into()));
        }
        Ok(Self { tokens, answers, token_index, answer_index })
    }

    /// Rebuilds lookup tables after deserialization.
    pub fn reindexed(self) -> Result<Self> {
        Self::new(self.tokens, self.answers)
    }

    pub fn num_tokens(&self) -> usize {
        self.tokens.len()
    }

    /// Number of answer classes.
    pub fn num_answers(&self) -> usize {
        self.answers.len()
    }

    pub fn token_id(&self, token: &str) -> usize {
        self.token_index.get(token).copied().unwrap_or(UNK)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.token_id(t)).collect()
    }

    pub fn answer_id(&self, answer: &str) -> Option<usize> {
        self.answer_index.get(answer).copied()
    }

    pub fn answer(&self, class: usize) -> Option<&str> {
        self.answers.get(class).map(String::as_str)
    }
}

pub fn build_vocab(train: &[QAPair]) -> Result<Vocabulary> {
    if train.is_empty() {
        return Err(Error::Empty("training pairs"));
    }
    let mut tokens: Vec<String> = train.iter().flat_map(|p| p.question.iter().cloned()).collect();
    tokens.sort();
    tokens.dedup();
    let mut answers: Vec<String> = train.iter().map(|p| p.answer.clone()).collect();
    answers.sort();
    answers.dedup();
    let all = ["<pad>".to_string(), "<unk>".to_string()].into_iter().chain(tokens).collect();
    Vocabulary::new(all, answers)
}

/// Most frequent training answer per question type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTypePrior {
    pub answers: BTreeMap<QType, String>,
}

impl QTypePrior {
    pub fn predict(&self, t: QType) -> Option<&str> {
        self.answers.get(&t).map(String::as_str)
    }
}

/// Ties between equally frequent answers go to the lexicographically smallest.
pub fn qtype_prior(train: &[QAPair]) -> Result<QTypePrior> {
    if train.is_empty() {
        return Err(Error::Empty("training pairs"));
    }
    let mut counts: BTreeMap<QType, BTreeMap<&str, usize>> = BTreeMap::new();
    for p in train {
        *counts.entry(p.qtype).or_default().entry(&p.answer).or_default() += 1;
    }
    let answers = counts
        .into_iter()
        .map(|(t, c)| {
            let best = c.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(a, _)| a.to_string());
            (t, best.expect("nonempty type"))
        })
        .collect();
    Ok(QTypePrior { answers })
}
