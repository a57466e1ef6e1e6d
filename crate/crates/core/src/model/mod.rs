//! The VQA networks: question encoder, convolutional backbone, within-image
//! bilinear attention, cross-image Tucker attention with optional diffusion,
//! aggregation and answer prediction.
//!
//! Row-vector convention throughout: features are `[1, d]` rows and layers
//! compute `x W + b`.

mod checkpoint;
mod config;
mod input;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{gru_sequence, Graph, GruParams, ParamId, ParamStore, Tensor, Var};

pub use self::checkpoint::Checkpoint;
pub use self::config::{AnswerPrediction, Dims, InputVariant, ModelConfig, NUM_VIEWS};
pub use self::input::{image_to_tensor, prepare_input, ModelInput};

const EMBED_INIT: f64 = 1.0;

/// Tolerance for the runtime check on attention weights and diffusion columns.
pub const DISTRIBUTION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
struct Linear {
    w: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct Conv {
    kernel: ParamId,
    bias: ParamId,
}

/// Parameters of a Tucker fusion: two input projections and a core stored as
/// `[rank_x, rank_y * out]`.
#[derive(Debug, Clone, Copy)]
pub struct TuckerParams {
    w_x: ParamId,
    w_y: ParamId,
    core: ParamId,
    rank_y: usize,
    out: usize,
}

#[derive(Debug, Clone, Copy)]
struct MlbParams {
    cell: Linear,
    question: Linear,
    score: ParamId,
    visual_out: Linear,
    question_out: Linear,
}

#[derive(Debug, Clone)]
struct Params {
    embed: ParamId,
    gru: GruParams,
    convs: [Conv; 3],
    mlb: MlbParams,
    attention: Option<TuckerParams>,
    diffusion: Option<Linear>,
    fusion: Option<TuckerParams>,
    classifier: Linear,
}

/// How the diffusion matrix is produced in a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffusionMode {
    /// The learned, question-conditioned matrix.
    #[default]
    Learned,
    /// `M = I`; the diffusion parameters are still evaluated so they stay in the graph.
    Identity,
    /// No diffusion step at all.
    Off,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ForwardOptions {
    pub diffusion: DiffusionMode,
}

/// What the model looked at: cross-image weights and within-image heatmaps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AttentionTrace {
    /// Cross-image attention weights, one per image.
    pub alpha: Vec<f64>,
    /// Weights after diffusion, when diffusion is active.
    pub diffused: Option<Vec<f64>>,
    /// Column-stochastic diffusion matrix, row-major `[J, J]`.
    pub diffusion: Option<Vec<f64>>,
    /// Within-image attention over grid cells, one heatmap per image.
    pub heatmaps: Vec<Vec<f64>>,
}

/// Question-independent visual features of one sample.
#[derive(Debug, Clone)]
pub struct VisualCache {
    features: Vec<Var>,
    projected: Vec<Var>,
}

impl VisualCache {
    pub fn features(&self) -> &[Var] {
        &self.features
    }
}

/// Output of a forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub logits: Var,
    /// `[J, 1]` attention weights (absent for single-image and averaged variants).
    pub alpha: Option<Var>,
    pub diffused: Option<Var>,
    pub diffusion: Option<Var>,
    pub aggregated: Var,
    pub heatmaps: Vec<Var>,
}

impl Forward {
    pub fn trace(&self, g: &Graph) -> AttentionTrace {
        let data = |v: Var| g.value(v).data().to_vec();
        AttentionTrace {
            alpha: self.alpha.map(data).unwrap_or_default(),
            diffused: self.diffused.map(data),
            diffusion: self.diffusion.map(data),
            heatmaps: self.heatmaps.iter().map(|&h| data(h)).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    store: ParamStore,
    params: Params,
}

fn linear(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Linear {
    let w = store.add_glorot(&format!("{name}.w"), &[fan_in, fan_out], fan_in, fan_out, rng);
    let b = store.add_zeros(&format!("{name}.b"), &[fan_out]);
    Linear { w, b }
}

fn tucker(store: &mut ParamStore, name: &str, dx: usize, dy: usize, d: &Dims, out: usize, rng: &mut ChaCha8Rng) -> TuckerParams {
    let (a, b) = (d.rank_x, d.rank_y);
    TuckerParams {
        w_x: store.add_glorot(&format!("{name}.w_x"), &[dx, a], dx, a, rng),
        w_y: store.add_glorot(&format!("{name}.w_y"), &[dy, b], dy, b, rng),
        core: store.add_glorot(&format!("{name}.core"), &[a, b * out], a * b, out, rng),
        rank_y: b,
        out,
    }
}

impl Model {
    /// Freshly initialized weights; identical `(config, seed)` give identical models.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::new();
        let d = config.dims;
        let embed = s.add_uniform("qenc.embed", &[config.vocab_size, d.embed], EMBED_INIT, &mut rng);
        let gru = GruParams::init(&mut s, "qenc.gru", d.embed, d.question, &mut rng);
        let channels = [3, d.conv1, d.conv2, d.visual];
        let convs = [0, 1, 2].map(|i| {
            let (cin, cout) = (channels[i], channels[i + 1]);
            let name = format!("backbone.conv{}", i + 1);
            Conv {
                // He-uniform: the kernels feed ReLUs.
                kernel: s.add_uniform(&format!("{name}.w"), &[cout, cin, 3, 3], (6.0 / (cin * 9) as f64).sqrt(), &mut rng),
                bias: s.add_zeros(&format!("{name}.b"), &[cout]),
            }
        });
        let mlb = MlbParams {
            cell: linear(&mut s, "mlb.cell", d.visual, d.attention_hidden, &mut rng),
            question: linear(&mut s, "mlb.question", d.question, d.attention_hidden, &mut rng),
            score: s.add_glorot("mlb.score", &[d.attention_hidden, 1], d.attention_hidden, 1, &mut rng),
            visual_out: linear(&mut s, "mlb.visual_out", d.visual, d.fused, &mut rng),
            question_out: linear(&mut s, "mlb.question_out", d.question, d.fused, &mut rng),
        };
        let variant = config.input_variant;
        let attention = variant
            .uses_attention()
            .then(|| tucker(&mut s, "att", config.aggregated_width(), d.question, &d, 1, &mut rng));
        let diffusion = variant
            .uses_diffusion()
            .then(|| linear(&mut s, "diff", d.question, NUM_VIEWS * NUM_VIEWS, &mut rng));
        let width = config.aggregated_width();
        let (fusion, cls_in) = match config.answer_prediction {
            AnswerPrediction::FusionAggregation => {
                (Some(tucker(&mut s, "fuse", width, d.question, &d, d.fusion_out, &mut rng)), d.fusion_out)
            }
            AnswerPrediction::Aggregation => (None, width),
        };
        let classifier = linear(&mut s, "cls", cls_in, config.num_answers, &mut rng);
        let params = Params { embed, gru, convs, mlb, attention, diffusion, fusion, classifier };
        Ok(Self { config, store: s, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn p(&self, g: &mut Graph, id: ParamId) -> Var {
        g.param(&self.store, id)
    }

    fn affine(&self, g: &mut Graph, x: Var, l: Linear) -> Result<Var> {
        let w = self.p(g, l.w);
        let b = self.p(g, l.b);
        let y = g.matmul(x, w)?;
        g.add_bias(y, b)
    }

    /// Final GRU state over the embedded tokens, `[1, d_q]`.
    pub fn encode_question(&self, g: &mut Graph, tokens: &[usize]) -> Result<Var> {
        if tokens.is_empty() {
            return Err(Error::Empty("question tokens"));
        }
        let vocab = self.config.vocab_size;
        let ids: Vec<usize> = tokens.iter().map(|&t| if t < vocab { t } else { crate::qgen::UNK }).collect();
        let table = self.p(g, self.params.embed);
        let xs = g.embedding_lookup(table, &ids)?;
        gru_sequence(g, &self.store, &self.params.gru, xs)
    }

    /// Three conv3x3 + relu + 2x2 average-pool stages, giving `[S, d_v]`
    /// cell features. A double-width input is additionally pooled 2:1 along
    /// the width so every variant yields the same grid.
    pub fn backbone_features(&self, g: &mut Graph, image: &Tensor) -> Result<Var> {
        let d = self.config.dims;
        let n = d.input_size();
        let wide = match image.shape() {
            [3, h, w] if *h == n && *w == n => false,
            [3, h, w] if *h == n && *w == 2 * n && self.config.input_variant == InputVariant::EqAvgpool => true,
            s => return Err(Error::shape("backbone_features", format!("image {s:?} for input size {n}"))),
        };
        // Pixels are centered from [0, 1] to [-1, 1].
        let centered = image.data().iter().map(|v| 2.0 * v - 1.0).collect();
        let mut x = g.constant(Tensor::new(image.shape().to_vec(), centered)?);
        for conv in self.params.convs {
            let k = self.p(g, conv.kernel);
            let b = self.p(g, conv.bias);
            x = g.conv2d(x, k, b, 1, 1)?;
            x = g.relu(x)?;
            x = pool2(g, x, 2, 2)?;
        }
        if wide {
            x = pool2(g, x, 1, 2)?;
        }
        let x = g.reshape(x, &[d.visual, d.cells()])?;
        g.transpose(x)
    }

    /// Visual features and their question-independent attention projection
    /// for every image of a sample.
    pub fn visual(&self, g: &mut Graph, input: &ModelInput) -> Result<VisualCache> {
        input.check(&self.config)?;
        let mut features = Vec::with_capacity(input.images.len());
        let mut projected = Vec::with_capacity(input.images.len());
        for img in &input.images {
            let f = self.backbone_features(g, img)?;
            projected.push(self.affine(g, f, self.params.mlb.cell)?);
            features.push(f);
        }
        Ok(VisualCache { features, projected })
    }

    /// Within-image attention and bilinear fusion for one image: returns the
    /// fused `[1, d_g]` feature and the `[S, 1]` heatmap.
    pub fn mlb_fuse(&self, g: &mut Graph, features: Var, q: Var) -> Result<(Var, Var)> {
        let proj = self.affine(g, features, self.params.mlb.cell)?;
        self.mlb_fuse_projected(g, features, proj, q)
    }

    fn mlb_fuse_projected(&self, g: &mut Graph, features: Var, proj: Var, q: Var) -> Result<(Var, Var)> {
        let m = self.params.mlb;
        let cells = g.shape(features)[0];
        let qh = self.affine(g, q, m.question)?;
        let qh = g.repeat_rows(qh, cells)?;
        let joint = g.hadamard(proj, qh)?;
        let joint = g.tanh(joint)?;
        let w = self.p(g, m.score);
        let scores = g.matmul(joint, w)?;
        let heatmap = g.softmax(scores, 0)?;
        let ht = g.transpose(heatmap)?;
        let attended = g.matmul(ht, features)?;
        let v = self.affine(g, attended, m.visual_out)?;
        let v = g.tanh(v)?;
        let u = self.affine(g, q, m.question_out)?;
        let u = g.tanh(u)?;
        Ok((g.hadamard(v, u)?, heatmap))
    }

    /// Tucker fusion of `x` (`[n, dx]`) with one row `y` (`[1, dy]`):
    /// `z[i, m] = sum_ab core[a, b, m] (x W_x)[i, a] (y W_y)[b]`.
    /// With `n > 1` the output width must be 1, giving `[n, 1]`; with `n = 1`
    /// the result is `[1, out]`.
    pub fn tucker_fuse(&self, g: &mut Graph, p: &TuckerParams, x: Var, y: Var) -> Result<Var> {
        let n = g.shape(x)[0];
        let wx = self.p(g, p.w_x);
        let wy = self.p(g, p.w_y);
        let core = self.p(g, p.core);
        let xp = g.matmul(x, wx)?;
        let yp = g.matmul(y, wy)?;
        let xc = g.matmul(xp, core)?;
        if p.out == 1 {
            let yt = g.transpose(yp)?;
            g.matmul(xc, yt)
        } else if n == 1 {
            let xc = g.reshape(xc, &[p.rank_y, p.out])?;
            g.matmul(yp, xc)
        } else {
            Err(Error::shape("tucker_fuse", format!("{n} rows with output width {}", p.out)))
        }
    }

    /// Attention fusion parameters (present for attention variants).
    pub fn attention_params(&self) -> Option<TuckerParams> {
        self.params.attention
    }

    /// Answer-level fusion parameters (present under fusion aggregation).
    pub fn fusion_params(&self) -> Option<TuckerParams> {
        self.params.fusion
    }

    /// Per-image rows `[l_j, g_j]` (or `g_j` without the location feature), `[J, width]`.
    pub fn stack_views(&self, g: &mut Graph, gs: &[Var]) -> Result<Var> {
        let stacked = g.concat(gs, 0)?;
        if !self.config.use_location_feature {
            return Ok(stacked);
        }
        let eye = g.constant(identity(gs.len()));
        g.concat(&[eye, stacked], 1)
    }

    /// Softmax over images of the scalar Tucker fusion of each row of `views` with the question.
    pub fn cubemap_attention(&self, g: &mut Graph, views: Var, q: Var) -> Result<Var> {
        let p = self.params.attention.ok_or_else(|| Error::Unsupported("attention".into()))?;
        let logits = self.tucker_fuse(g, &p, views, q)?;
        g.softmax(logits, 0)
    }

    /// Question-conditioned `[J, J]` matrix whose columns sum to one.
    pub fn diffusion_matrix(&self, g: &mut Graph, q: Var) -> Result<Var> {
        let l = self.params.diffusion.ok_or_else(|| Error::Unsupported("diffusion".into()))?;
        let logits = self.affine(g, q, l)?;
        let logits = g.reshape(logits, &[NUM_VIEWS, NUM_VIEWS])?;
        g.softmax(logits, 0)
    }

    /// Weighted sum of the rows of `views` with `[J, 1]` weights, optionally
    /// diffused first: `beta = M alpha`.
    pub fn aggregate(&self, g: &mut Graph, views: Var, alpha: Var, m: Option<Var>) -> Result<(Var, Option<Var>)> {
        let j = g.shape(views)[0];
        if g.shape(alpha) != [j, 1] {
            return Err(Error::shape("aggregate", format!("weights {:?} for {j} views", g.shape(alpha))));
        }
        let beta = match m {
            Some(m) => Some(g.matmul(m, alpha)?),
            None => None,
        };
        let wt = g.transpose(beta.unwrap_or(alpha))?;
        Ok((g.matmul(wt, views)?, beta))
    }

    pub fn predict_answer(&self, g: &mut Graph, aggregated: Var, q: Var) -> Result<Var> {
        let h = match &self.params.fusion {
            Some(p) => self.tucker_fuse(g, p, aggregated, q)?,
            None => aggregated,
        };
        let logits = self.affine(g, h, self.params.classifier)?;
        g.reshape(logits, &[self.config.num_answers])
    }

    /// Full pass for one question given precomputed visual features.
    pub fn answer(&self, g: &mut Graph, visual: &VisualCache, tokens: &[usize], opts: ForwardOptions) -> Result<Forward> {
        let q = self.encode_question(g, tokens)?;
        let mut gs = Vec::with_capacity(visual.features.len());
        let mut heatmaps = Vec::with_capacity(visual.features.len());
        for (&f, &proj) in visual.features.iter().zip(&visual.projected) {
            let (gj, h) = self.mlb_fuse_projected(g, f, proj, q)?;
            gs.push(gj);
            heatmaps.push(h);
        }
        let variant = self.config.input_variant;
        let (aggregated, alpha, diffused, diffusion) = if variant.uses_attention() {
            let views = self.stack_views(g, &gs)?;
            let alpha = self.cubemap_attention(g, views, q)?;
            let m = match (variant.uses_diffusion(), opts.diffusion) {
                (false, _) | (true, DiffusionMode::Off) => None,
                (true, DiffusionMode::Learned) => Some(self.diffusion_matrix(g, q)?),
                (true, DiffusionMode::Identity) => {
                    // Evaluated but unused, so every parameter still receives a (zero) gradient.
                    self.diffusion_matrix(g, q)?;
                    Some(g.constant(identity(NUM_VIEWS)))
                }
            };
            let (agg, beta) = self.aggregate(g, views, alpha, m)?;
            self.check_distributions(g, alpha, beta, m)?;
            (agg, Some(alpha), beta, m)
        } else if gs.len() > 1 {
            let stacked = g.concat(&gs, 0)?;
            (g.mean_pool(stacked, 0)?, None, None, None)
        } else {
            (g.reshape(gs[0], &[1, self.config.dims.fused])?, None, None, None)
        };
        let aggregated = g.reshape(aggregated, &[1, self.config.aggregated_width()])?;
        let logits = self.predict_answer(g, aggregated, q)?;
        Ok(Forward { logits, alpha, diffused, diffusion, aggregated, heatmaps })
    }

    /// Visual features then [`Model::answer`].
    pub fn forward(&self, g: &mut Graph, input: &ModelInput, tokens: &[usize], opts: ForwardOptions) -> Result<Forward> {
        let visual = self.visual(g, input)?;
        self.answer(g, &visual, tokens, opts)
    }

    /// Logits and attention trace for one question, outside of training.
    pub fn infer(&self, input: &ModelInput, tokens: &[usize]) -> Result<(Vec<f64>, AttentionTrace)> {
        let mut g = Graph::new();
        let out = self.forward(&mut g, input, tokens, ForwardOptions::default())?;
        Ok((g.value(out.logits).data().to_vec(), out.trace(&g)))
    }

    fn check_distributions(&self, g: &Graph, alpha: Var, beta: Option<Var>, m: Option<Var>) -> Result<()> {
        if !g.is_checked() {
            return Ok(());
        }
        let is_distribution = |xs: &[f64]| {
            xs.iter().all(|&x| x >= 0.0) && (xs.iter().sum::<f64>() - 1.0).abs() <= DISTRIBUTION_TOL
        };
        if !is_distribution(g.value(alpha).data()) || beta.is_some_and(|b| !is_distribution(g.value(b).data())) {
            return Err(Error::domain("attention", "weights are not a probability distribution"));
        }
        if let Some(m) = m {
            let v = g.value(m).data();
            let j = NUM_VIEWS;
            for col in 0..j {
                let column: Vec<f64> = (0..j).map(|r| v[r * j + col]).collect();
                if !is_distribution(&column) {
                    return Err(Error::domain("diffusion", format!("column {col} does not sum to one")));
                }
            }
        }
        Ok(())
    }
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

fn identity(n: usize) -> Tensor {
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        data[i * n + i] = 1.0;
    }
    Tensor::new(vec![n, n], data).expect("square")
}

/// Average pooling of a `[C, H, W]` map by `fy x fx`.
fn pool2(g: &mut Graph, x: Var, fy: usize, fx: usize) -> Result<Var> {
    let (c, h, w) = match g.shape(x) {
        [c, h, w] if h % fy == 0 && w % fx == 0 => (*c, *h, *w),
        s => return Err(Error::shape("pool", format!("{s:?} by {fy}x{fx}"))),
    };
    let x = g.reshape(x, &[c * h / fy, fy, w / fx, fx])?;
    let x = g.mean_pool(x, 3)?;
    let x = g.mean_pool(x, 1)?;
    g.reshape(x, &[c, h / fy, w / fx])
}
