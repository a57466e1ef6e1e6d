use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{project_to_cubemaps, CubeFace, EquirectImage, Image};
use crate::io;
use crate::model::{argmax, prepare_input, Checkpoint, InputVariant, NUM_VIEWS};
use crate::qgen::tokenize;

/// Answer plus attention for one question, written next to the face images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionSidecar {
    pub question: String,
    pub answer: String,
    pub variant: InputVariant,
    pub faces: Vec<String>,
    /// Cross-face weights; uniform for the mean-pooled variant.
    pub alpha: Vec<f64>,
    pub diffused: Option<Vec<f64>>,
    /// Within-face heatmaps, row-major over a `grid x grid` cell layout.
    pub heatmaps: Vec<Vec<f64>>,
    pub grid: usize,
}

/// Answers `question` about `image`, returning the answer string and the attention trace.
pub fn ask(checkpoint: &Checkpoint, image: &EquirectImage, question: &str) -> Result<(String, crate::model::AttentionTrace)> {
    let model = checkpoint.model()?;
    let input = prepare_input(image, model.config())?;
    let tokens = checkpoint.vocab.encode(&tokenize(question));
    if tokens.is_empty() {
        return Err(Error::Empty("question"));
    }
    let (logits, trace) = model.infer(&input, &tokens)?;
    let answer = checkpoint.vocab.answer(argmax(&logits)).ok_or_else(|| Error::Vocab("class without answer".into()))?;
    Ok((answer.to_string(), trace))
}

/// Tints a face toward red in proportion to the heatmap weight of each cell.
fn overlay(face: &Image, heatmap: &[f64], grid: usize) -> Result<Image> {
    let peak = heatmap.iter().copied().fold(0.0, f64::max);
    let n = face.width();
    Image::from_fn(n, face.height(), |x, y| {
        let cell = (y * grid / face.height()) * grid + x * grid / n;
        let t = if peak > 0.0 { 0.6 * heatmap[cell] / peak } else { 0.0 };
        let p = face.pixel(x, y);
        [p[0] * (1.0 - t) + t, p[1] * (1.0 - t), p[2] * (1.0 - t)]
    })
}

/// Writes `<face>.png` with heatmap overlays for all six faces and
/// `attention.json` with the cross-face weights.
pub fn emit_attention_figures(
    checkpoint: &Checkpoint,
    image: &EquirectImage,
    question: &str,
    out_dir: &Path,
    face_size: usize,
) -> Result<AttentionSidecar> {
    let variant = checkpoint.config.input_variant;
    if !variant.is_cubemap() {
        return Err(Error::Unsupported(format!("attention figures need a cubemap model, got {variant}")));
    }
    let (answer, trace) = ask(checkpoint, image, question)?;
    let grid = checkpoint.config.dims.grid;
    let alpha = if trace.alpha.is_empty() { vec![1.0 / NUM_VIEWS as f64; NUM_VIEWS] } else { trace.alpha.clone() };
    let cubemap = project_to_cubemaps(image, face_size)?;
    io::create_dir(out_dir)?;
    let mut faces = Vec::with_capacity(NUM_VIEWS);
    for (j, heatmap) in trace.heatmaps.iter().enumerate() {
        let face = CubeFace::from_index(j).expect("six faces");
        let img = overlay(cubemap.face(face), heatmap, grid)?;
        io::save_png(&img, &out_dir.join(format!("{}.png", face.name())))?;
        faces.push(face.name().to_string());
    }
    let sidecar = AttentionSidecar {
        question: question.to_string(),
        answer,
        variant,
        faces,
        alpha,
        diffused: trace.diffused,
        heatmaps: trace.heatmaps,
        grid,
    };
    io::write_json(&out_dir.join("attention.json"), &sidecar)?;
    Ok(sidecar)
}
