use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the panorama reaches the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputVariant {
    /// Central square crop of the panorama.
    EqCentralCrop,
    /// Whole panorama squashed to a square.
    EqResize,
    /// Full-aspect panorama; the feature grid is average-pooled to the standard size.
    EqAvgpool,
    /// 2x3 grid of panorama tiles through the cubemap attention machinery.
    DirectSplit,
    /// Six cubemap faces, features averaged.
    CubeAvgpool,
    /// Six cubemap faces with Tucker-fusion attention.
    CubeTucker,
    /// Six cubemap faces with Tucker-fusion attention and attention diffusion.
    CubeTuckerDiffusion,
}

impl InputVariant {
    pub const ALL: [InputVariant; 7] = [
        InputVariant::EqCentralCrop,
        InputVariant::EqResize,
        InputVariant::EqAvgpool,
        InputVariant::DirectSplit,
        InputVariant::CubeAvgpool,
        InputVariant::CubeTucker,
        InputVariant::CubeTuckerDiffusion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InputVariant::EqCentralCrop => "eq-central-crop",
            InputVariant::EqResize => "eq-resize",
            InputVariant::EqAvgpool => "eq-avgpool",
            InputVariant::DirectSplit => "direct-split",
            InputVariant::CubeAvgpool => "cube-avgpool",
            InputVariant::CubeTucker => "cube-tucker",
            InputVariant::CubeTuckerDiffusion => "cube-tucker-diffusion",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|v| v.name() == s)
    }

    /// Number of images per sample.
    pub fn num_images(self) -> usize {
        match self {
            InputVariant::EqCentralCrop | InputVariant::EqResize | InputVariant::EqAvgpool => 1,
            _ => 6,
        }
    }

    pub fn uses_attention(self) -> bool {
        matches!(self, InputVariant::DirectSplit | InputVariant::CubeTucker | InputVariant::CubeTuckerDiffusion)
    }

    pub fn uses_diffusion(self) -> bool {
        matches!(self, InputVariant::DirectSplit | InputVariant::CubeTuckerDiffusion)
    }

    pub fn is_cubemap(self) -> bool {
        matches!(self, InputVariant::CubeAvgpool | InputVariant::CubeTucker | InputVariant::CubeTuckerDiffusion)
    }
}

impl std::fmt::Display for InputVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnswerPrediction {
    /// Classifier directly on the aggregated feature.
    Aggregation,
    /// Tucker fusion of the aggregated feature with the question, then the classifier.
    FusionAggregation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Dims {
    /// Word embedding width.
    pub embed: usize,
    /// Question feature width.
    pub question: usize,
    /// Visual feature width per grid cell.
    pub visual: usize,
    /// Hidden width of the within-image attention.
    pub attention_hidden: usize,
    /// Per-image fused feature width.
    pub fused: usize,
    /// Tucker ranks for the two projected inputs.
    pub rank_x: usize,
    pub rank_y: usize,
    /// Output width of the answer-level Tucker fusion.
    pub fusion_out: usize,
    /// Feature grid side; the grid has `grid * grid` cells.
    pub grid: usize,
    /// Channels of the first two convolution stages.
    pub conv1: usize,
    pub conv2: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Self {
            embed: 32,
            question: 64,
            visual: 64,
            attention_hidden: 64,
            fused: 128,
            rank_x: 32,
            rank_y: 32,
            fusion_out: 64,
            grid: 4,
            conv1: 8,
            conv2: 16,
        }
    }
}

impl Dims {
    /// Square input side: three 2x pooling stages down to the grid.
    pub fn input_size(&self) -> usize {
        self.grid * 8
    }

    pub fn cells(&self) -> usize {
        self.grid * self.grid
    }

    /// Tiny dimensions used for gradient checks.
    pub fn tiny() -> Self {
        Self {
            embed: 4,
            question: 8,
            visual: 8,
            attention_hidden: 8,
            fused: 8,
            rank_x: 4,
            rank_y: 4,
            fusion_out: 8,
            grid: 2,
            conv1: 3,
            conv2: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_variant: InputVariant,
    pub answer_prediction: AnswerPrediction,
    pub use_location_feature: bool,
    pub dims: Dims,
    pub vocab_size: usize,
    pub num_answers: usize,
}

/// Number of images in the cubemap and direct-split variants.
pub const NUM_VIEWS: usize = 6;

impl ModelConfig {
    /// Defaults for a variant: fusion aggregation, location feature on
    /// wherever attention is used.
    pub fn new(input_variant: InputVariant, vocab_size: usize, num_answers: usize) -> Self {
        Self {
            input_variant,
            answer_prediction: AnswerPrediction::FusionAggregation,
            use_location_feature: input_variant.uses_attention(),
            dims: Dims::default(),
            vocab_size,
            num_answers,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.use_location_feature && !self.input_variant.uses_attention() {
            return Err(Error::Config(format!(
                "{} cannot use the location feature: averaging one-hot locations gives a constant vector",
                self.input_variant
            )));
        }
        let d = &self.dims;
        let sizes = [
            d.embed,
            d.question,
            d.visual,
            d.attention_hidden,
            d.fused,
            d.rank_x,
            d.rank_y,
            d.fusion_out,
            d.grid,
            d.conv1,
            d.conv2,
        ];
        if sizes.contains(&0) || self.vocab_size < 2 || self.num_answers == 0 {
            return Err(Error::Config(format!("all dimensions must be positive: {self:?}")));
        }
        Ok(())
    }

    /// Width of the aggregated feature fed to answer prediction.
    pub fn aggregated_width(&self) -> usize {
        self.dims.fused + if self.use_location_feature { NUM_VIEWS } else { 0 }
    }
}
