mod common;

use std::collections::BTreeMap;

use common::qa_oracle;
use panoqa_core::qgen::*;
use panoqa_core::synth::*;

fn corpus(n: u64) -> (Vec<QAPair>, BTreeMap<String, serde_json::Value>) {
    let mut pairs = Vec::new();
    let mut scenes = BTreeMap::new();
    for seed in 0..n {
        let spec = sample_scene(seed, &GenConfig::default()).unwrap();
        let (p, _) = generate_questions(&spec, "unused.png", 99, &Quota::default());
        scenes.insert(scene_id(seed), serde_json::to_value(&spec).unwrap());
        pairs.extend(p);
    }
    (pairs, scenes)
}

#[test]
fn every_pair_agrees_with_the_oracle() {
    let (pairs, scenes) = corpus(1000);
    let disagreements: Vec<String> = pairs
        .iter()
        .filter_map(|p| {
            let truth = qa_oracle::answer(&scenes[&p.scene_id], &p.text());
            (truth.as_deref() != Some(p.answer.as_str()))
                .then(|| format!("{}: {} -> {} (oracle {truth:?})", p.scene_id, p.text(), p.answer))
        })
        .collect();
    assert!(disagreements.is_empty(), "{} disagreements, first: {:?}", disagreements.len(), disagreements.first());
}

#[test]
fn oracle_handles_the_property_example() {
    let scene = serde_json::json!({
        "scene_type": "bedroom",
        "seed": 0,
        "objects": [
            {"id": 0, "category": "window", "color": "white", "material": "glass", "lonlat": [0.0, 0.0], "size": 0.2},
            {"id": 1, "category": "sofa", "color": "red", "material": "fabric", "lonlat": [0.8, 0.1], "size": 0.2},
        ]
    });
    let q = "what is the color of the sofa at the right of the window?";
    assert_eq!(qa_oracle::answer(&scene, q).as_deref(), Some("red"));
    let spec: SceneSpec = serde_json::from_value(scene).unwrap();
    let parsed = parse_question(&tokenize(q)).unwrap();
    assert_eq!(evaluate_question(&parsed, &spec).unwrap().answer, "red");
}

#[test]
fn every_question_parses_to_one_template() {
    let (pairs, _) = corpus(200);
    for p in &pairs {
        let q = parse_question(&p.question).unwrap();
        assert_eq!(q.tokens(), p.question);
        assert_eq!(q.qtype(), p.qtype);
    }
}

fn counts(pairs: &[QAPair], t: QType) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for p in pairs.iter().filter(|p| p.qtype == t) {
        *m.entry(p.answer.clone()).or_default() += 1;
    }
    m
}

#[test]
fn balancing_flattens_answers_without_changing_them() {
    let (pairs, _) = corpus(1000);
    let balanced = balance_answers(&pairs, 5);
    assert_eq!(balance_answers(&pairs, 5), balanced);
    for p in &balanced {
        assert!(pairs.contains(p));
    }
    let exist = counts(&balanced, QType::Exist);
    let (yes, no) = (exist["yes"] as f64, exist["no"] as f64);
    assert!((yes - no).abs() <= f64::max(1.0, 0.05 * (yes + no)), "yes {yes} no {no}");
    let counting = counts(&balanced, QType::Counting);
    let small: Vec<f64> = ["0", "1", "2"].iter().map(|a| counting[*a] as f64).collect();
    let ratio = small.iter().cloned().fold(f64::MIN, f64::max) / small.iter().cloned().fold(f64::MAX, f64::min);
    assert!(ratio <= 1.2, "counting 0/1/2 = {small:?}");
}

#[test]
fn prior_accuracy_equals_recount() {
    let (pairs, _) = corpus(300);
    let balanced = balance_answers(&pairs, 1);
    let prior = qtype_prior(&balanced).unwrap();
    let correct = balanced.iter().filter(|p| prior.predict(p.qtype) == Some(p.answer.as_str())).count();
    let recount: usize = QType::ALL.iter().map(|t| counts(&balanced, *t).values().copied().max().unwrap_or(0)).sum();
    assert_eq!(correct, recount);
}

#[test]
fn perfectly_balanced_exist_prior_is_half() {
    let mk = |a: &str| QAPair {
        scene_id: "s".into(),
        image_path: "s.png".into(),
        question: tokenize("is there a chair in the office?"),
        answer: a.into(),
        qtype: QType::Exist,
        target_region: None,
    };
    let pairs: Vec<QAPair> = (0..100).map(|i| mk(if i % 2 == 0 { "yes" } else { "no" })).collect();
    let prior = qtype_prior(&pairs).unwrap();
    let acc = pairs.iter().filter(|p| prior.predict(p.qtype) == Some(&p.answer)).count() as f64 / 100.0;
    assert_eq!(acc, 0.5);
}
