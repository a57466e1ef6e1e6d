mod common;

use common::{check_model_gradients, random_input, random_tensor};
use panoqa_core::model::*;
use panoqa_core::tensor::{gru_cell, Graph, Tensor};

const VOCAB: usize = 12;
const K: usize = 7;

fn tiny(variant: InputVariant) -> ModelConfig {
    let mut cfg = ModelConfig::new(variant, VOCAB, K);
    cfg.dims = Dims::tiny();
    cfg
}

fn model(variant: InputVariant, seed: u64) -> Model {
    Model::new(tiny(variant), seed).unwrap()
}

fn set(model: &mut Model, name: &str, f: impl Fn(usize) -> f64) {
    let id = model.store().find(name).unwrap_or_else(|| panic!("no parameter {name}"));
    for (i, v) in model.store_mut().value_mut(id).data_mut().iter_mut().enumerate() {
        *v = f(i);
    }
}

fn values(g: &Graph, v: panoqa_core::tensor::Var) -> Vec<f64> {
    g.value(v).data().to_vec()
}

#[test]
fn single_token_question_is_one_gru_step() {
    let m = model(InputVariant::CubeTucker, 3);
    let mut g = Graph::new();
    let q = m.encode_question(&mut g, &[5]).unwrap();
    let mut g2 = Graph::new();
    let table = g2.param(m.store(), m.store().find("qenc.embed").unwrap());
    let x = g2.embedding_lookup(table, &[5]).unwrap();
    let h0 = g2.constant(Tensor::zeros(&[1, m.config().dims.question]));
    let gru = panoqa_core::tensor::GruParams {
        w_z: m.store().find("qenc.gru.w_z").unwrap(),
        u_z: m.store().find("qenc.gru.u_z").unwrap(),
        b_z: m.store().find("qenc.gru.b_z").unwrap(),
        w_r: m.store().find("qenc.gru.w_r").unwrap(),
        u_r: m.store().find("qenc.gru.u_r").unwrap(),
        b_r: m.store().find("qenc.gru.b_r").unwrap(),
        w_h: m.store().find("qenc.gru.w_h").unwrap(),
        u_h: m.store().find("qenc.gru.u_h").unwrap(),
        b_h: m.store().find("qenc.gru.b_h").unwrap(),
        input: m.config().dims.embed,
        hidden: m.config().dims.question,
    };
    let h1 = gru_cell(&mut g2, m.store(), &gru, x, h0).unwrap();
    assert_eq!(values(&g, q), values(&g2, h1));
}

#[test]
fn question_encoding_is_order_sensitive_and_tolerates_unknowns() {
    let m = model(InputVariant::CubeTucker, 3);
    let mut g = Graph::new();
    let a = m.encode_question(&mut g, &[2, 3, 4, 5]).unwrap();
    let b = m.encode_question(&mut g, &[5, 4, 3, 2]).unwrap();
    assert_ne!(values(&g, a), values(&g, b));
    let unk = m.encode_question(&mut g, &[1]).unwrap();
    let out_of_range = m.encode_question(&mut g, &[VOCAB + 40]).unwrap();
    assert_eq!(values(&g, unk), values(&g, out_of_range));
    assert!(m.encode_question(&mut g, &[]).is_err());
}

#[test]
fn backbone_shape_and_constant_images() {
    let m = model(InputVariant::CubeTucker, 4);
    let d = m.config().dims;
    let n = d.input_size();
    let mut g = Graph::new();
    let f = m.backbone_features(&mut g, &Tensor::filled(&[3, n, n], 0.4)).unwrap();
    assert_eq!(g.shape(f), [d.cells(), d.visual]);
    let v = values(&g, f);
    for cell in 1..d.cells() {
        for c in 0..d.visual {
            assert!((v[cell * d.visual + c] - v[c]).abs() < 1e-9);
        }
    }
    assert!(m.backbone_features(&mut g, &Tensor::zeros(&[3, n + 1, n])).is_err());
    let wide = model(InputVariant::EqAvgpool, 4);
    let f = wide.backbone_features(&mut g, &Tensor::filled(&[3, n, 2 * n], 0.1)).unwrap();
    assert_eq!(g.shape(f), [d.cells(), d.visual]);
}

#[test]
fn identical_cells_give_a_uniform_heatmap() {
    let m = model(InputVariant::CubeTucker, 5);
    let d = m.config().dims;
    let mut g = Graph::new();
    let row = random_tensor(&[1, d.visual], 9);
    let cells = Tensor::new(vec![d.cells(), d.visual], row.data().repeat(d.cells())).unwrap();
    let f = g.constant(cells);
    let q = g.constant(random_tensor(&[1, d.question], 2));
    let (fused, heat) = m.mlb_fuse(&mut g, f, q).unwrap();
    assert_eq!(g.shape(fused), [1, d.fused]);
    for h in values(&g, heat) {
        assert!((h - 1.0 / d.cells() as f64).abs() < 1e-15);
    }
    let f = g.constant(random_tensor(&[d.cells(), d.visual], 3));
    let (_, heat) = m.mlb_fuse(&mut g, f, q).unwrap();
    let h = values(&g, heat);
    assert!(h.iter().all(|&x| x >= 0.0));
    assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn tucker_fusion_closed_forms() {
    let mut cfg = tiny(InputVariant::CubeTucker);
    cfg.dims.rank_x = 4;
    cfg.dims.rank_y = 4;
    cfg.dims.fusion_out = 4;
    let mut m = Model::new(cfg, 6).unwrap();
    let p = m.fusion_params().unwrap();
    let width = m.config().aggregated_width();
    let dq = m.config().dims.question;
    let x = random_tensor(&[1, width], 1);
    let y = random_tensor(&[1, dq], 2);

    let run = |m: &Model, x: &Tensor| {
        let mut g = Graph::new();
        let (xv, yv) = (g.constant(x.clone()), g.constant(y.clone()));
        let z = m.tucker_fuse(&mut g, &p, xv, yv).unwrap();
        values(&g, z)
    };
    let doubled = Tensor::new(vec![1, width], x.data().iter().map(|v| 2.0 * v).collect()).unwrap();
    let (z1, z2) = (run(&m, &x), run(&m, &doubled));
    for (a, b) in z1.iter().zip(&z2) {
        assert!((2.0 * a - b).abs() < 1e-12);
    }

    set(&mut m, "fuse.core", |_| 0.0);
    assert!(run(&m, &x).iter().all(|&v| v == 0.0));

    // Diagonal core: z_m = (x W_x)_m (y W_y)_m.
    set(&mut m, "fuse.core", |i| {
        let (a, rest) = (i / 16, i % 16);
        let (b, k) = (rest / 4, rest % 4);
        if a == b && b == k { 1.0 } else { 0.0 }
    });
    let mut g = Graph::new();
    let (xv, yv) = (g.constant(x.clone()), g.constant(y.clone()));
    let wx = g.param(m.store(), m.store().find("fuse.w_x").unwrap());
    let wy = g.param(m.store(), m.store().find("fuse.w_y").unwrap());
    let xp = g.matmul(xv, wx).unwrap();
    let yp = g.matmul(yv, wy).unwrap();
    let expect = g.hadamard(xp, yp).unwrap();
    let expect = values(&g, expect);
    for (a, b) in run(&m, &x).iter().zip(&expect) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn attention_is_uniform_for_identical_views_without_location() {
    let mut cfg = tiny(InputVariant::CubeTucker);
    cfg.use_location_feature = false;
    let m = Model::new(cfg, 7).unwrap();
    let d = m.config().dims;
    let mut g = Graph::new();
    let gj = g.constant(random_tensor(&[1, d.fused], 4));
    let views = m.stack_views(&mut g, &[gj; 6]).unwrap();
    let q = g.constant(random_tensor(&[1, d.question], 5));
    let alpha = m.cubemap_attention(&mut g, views, q).unwrap();
    for a in values(&g, alpha) {
        assert!((a - 1.0 / 6.0).abs() < 1e-15);
    }
}

#[test]
fn attention_is_permutation_equivariant() {
    let m = model(InputVariant::CubeTucker, 8);
    let d = m.config().dims;
    let width = m.config().aggregated_width();
    let rows = random_tensor(&[6, width], 11);
    let perm = [3, 0, 5, 1, 4, 2];
    let permuted: Vec<f64> = perm.iter().flat_map(|&r| rows.data()[r * width..(r + 1) * width].to_vec()).collect();
    let mut g = Graph::new();
    let q = g.constant(random_tensor(&[1, d.question], 12));
    let a = g.constant(rows);
    let b = g.constant(Tensor::new(vec![6, width], permuted).unwrap());
    let alpha_a = m.cubemap_attention(&mut g, a, q).unwrap();
    let alpha_b = m.cubemap_attention(&mut g, b, q).unwrap();
    let (va, vb) = (values(&g, alpha_a), values(&g, alpha_b));
    for (i, &r) in perm.iter().enumerate() {
        assert!((vb[i] - va[r]).abs() < 1e-15);
    }
    // With M = I the aggregate is invariant to the same permutation.
    let (ga, _) = m.aggregate(&mut g, a, alpha_a, None).unwrap();
    let (gb, _) = m.aggregate(&mut g, b, alpha_b, None).unwrap();
    for (x, y) in values(&g, ga).iter().zip(values(&g, gb)) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn diffusion_columns_are_distributions() {
    let mut m = model(InputVariant::CubeTuckerDiffusion, 9);
    let dq = m.config().dims.question;
    for s in 0..1000 {
        let mut g = Graph::new();
        let q = g.constant(random_tensor(&[1, dq], s).data().iter().map(|v| 5.0 * v).collect::<Vec<_>>().pipe(|d| Tensor::new(vec![1, dq], d).unwrap()));
        let mm = m.diffusion_matrix(&mut g, q).unwrap();
        let v = values(&g, mm);
        for col in 0..6 {
            let sum: f64 = (0..6).map(|r| v[r * 6 + col]).sum();
            assert!((sum - 1.0).abs() < 1e-6);
            assert!((0..6).all(|r| v[r * 6 + col] >= 0.0));
        }
    }
    set(&mut m, "diff.w", |_| 0.0);
    set(&mut m, "diff.b", |_| 0.0);
    let mut g = Graph::new();
    let q = g.constant(random_tensor(&[1, dq], 1));
    let mm = m.diffusion_matrix(&mut g, q).unwrap();
    assert!(values(&g, mm).iter().all(|&v| (v - 1.0 / 6.0).abs() < 1e-15));
}

trait Pipe: Sized {
    fn pipe<T>(self, f: impl FnOnce(Self) -> T) -> T {
        f(self)
    }
}
impl<T> Pipe for T {}

#[test]
fn aggregation_identities() {
    let m = model(InputVariant::CubeTuckerDiffusion, 10);
    let width = m.config().aggregated_width();
    let mut g = Graph::new();
    let views = g.constant(random_tensor(&[6, width], 13));
    let onehot = g.constant(Tensor::new(vec![6, 1], vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap());
    let eye = g.constant(Tensor::new(vec![6, 6], (0..36).map(|i| if i % 7 == 0 { 1.0 } else { 0.0 }).collect()).unwrap());
    let (agg, _) = m.aggregate(&mut g, views, onehot, Some(eye)).unwrap();
    assert_eq!(values(&g, agg), g.value(views).data()[2 * width..3 * width].to_vec());

    for s in 0..100 {
        let mut g = Graph::new();
        let dq = m.config().dims.question;
        let q = g.constant(random_tensor(&[1, dq], 100 + s));
        let logits = g.constant(random_tensor(&[6, 1], 200 + s));
        let alpha = g.softmax(logits, 0).unwrap();
        let mm = m.diffusion_matrix(&mut g, q).unwrap();
        let views = g.constant(random_tensor(&[6, width], 300 + s));
        let (_, beta) = m.aggregate(&mut g, views, alpha, Some(mm)).unwrap();
        let total: f64 = values(&g, beta.unwrap()).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn prediction_strategies_differ_and_have_k_logits() {
    let mut cfg = tiny(InputVariant::CubeTucker);
    let fused = Model::new(cfg.clone(), 11).unwrap();
    cfg.answer_prediction = AnswerPrediction::Aggregation;
    let plain = Model::new(cfg, 11).unwrap();
    let input = random_input(&fused, 1);
    let (a, _) = fused.infer(&input, &[2, 3]).unwrap();
    let (b, _) = plain.infer(&input, &[2, 3]).unwrap();
    assert_eq!(a.len(), K);
    assert_eq!(b.len(), K);
    assert_ne!(a, b);
}

#[test]
fn direct_split_and_cubemaps_share_the_architecture() {
    let cube = model(InputVariant::CubeTuckerDiffusion, 12);
    let split = model(InputVariant::DirectSplit, 12);
    let names = |m: &Model| m.store().ids().map(|id| (m.store().name(id).to_string(), m.store().value(id).shape().to_vec())).collect::<Vec<_>>();
    assert_eq!(names(&cube), names(&split));
    let (lc, tc) = cube.infer(&random_input(&cube, 2), &[3, 4]).unwrap();
    let (ls, ts) = split.infer(&random_input(&split, 2), &[3, 4]).unwrap();
    assert_eq!(lc.len(), ls.len());
    assert_eq!(tc.alpha.len(), ts.alpha.len());
    assert_eq!(tc.heatmaps.len(), ts.heatmaps.len());
}

#[test]
fn trace_matches_the_weights_used_in_aggregation() {
    let m = model(InputVariant::CubeTuckerDiffusion, 13);
    let input = random_input(&m, 3);
    let mut g = Graph::new();
    let out = m.forward(&mut g, &input, &[2, 5, 6], ForwardOptions::default()).unwrap();
    let trace = out.trace(&g);
    let alpha = values(&g, out.alpha.unwrap());
    assert_eq!(trace.alpha, alpha);
    // Recompute the aggregate by hand from the traced weights.
    let m_ = trace.diffusion.clone().unwrap();
    let beta: Vec<f64> = (0..6).map(|u| (0..6).map(|v| m_[u * 6 + v] * trace.alpha[v]).sum()).collect();
    assert_eq!(trace.diffused.clone().unwrap(), beta);
    assert!((trace.alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(trace.heatmaps.len(), 6);
}

#[test]
fn identity_diffusion_equals_no_diffusion() {
    let m = model(InputVariant::CubeTuckerDiffusion, 14);
    for s in 0..20 {
        let input = random_input(&m, s);
        let run = |mode| {
            let mut g = Graph::new();
            let out = m.forward(&mut g, &input, &[2, 3, 4], ForwardOptions { diffusion: mode }).unwrap();
            values(&g, out.logits)
        };
        let (a, b) = (run(DiffusionMode::Identity), run(DiffusionMode::Off));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}

#[test]
fn end_to_end_gradients_match_finite_differences() {
    let mut m = model(InputVariant::CubeTuckerDiffusion, 15);
    let input = random_input(&m, 4);
    let loss = |m: &Model, g: &mut Graph| {
        let out = m.forward(g, &input, &[2, 7, 3], ForwardOptions::default())?;
        g.cross_entropy(out.logits, 3)
    };
    let report = check_model_gradients(&mut m, &loss, 12);
    for r in &report {
        assert!(r.failures.is_empty(), "{:?}", r.failures);
    }
    assert!(report.iter().any(|r| r.name == "diff.w"));
}

#[test]
fn checkpoint_round_trip_reproduces_logits() {
    let m = model(InputVariant::CubeTucker, 16);
    let tokens: Vec<String> = ["<pad>", "<unk>"].iter().map(|s| s.to_string()).chain((0..VOCAB - 2).map(|i| format!("w{i}"))).collect();
    let answers: Vec<String> = (0..K).map(|i| format!("a{i}")).collect();
    let vocab = panoqa_core::qgen::Vocabulary::new(tokens, answers).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    Checkpoint::new(&m, &vocab).save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded.vocab, vocab);
    let m2 = loaded.model().unwrap();
    let input = random_input(&m, 5);
    assert_eq!(m.infer(&input, &[2, 3]).unwrap(), m2.infer(&input, &[2, 3]).unwrap());
}
