use crate::error::{Error, Result};
use crate::geom::{crop_and_resize, direct_split, project_to_cubemaps, CropMode, EquirectImage, Image};
use crate::tensor::Tensor;

use super::config::{InputVariant, ModelConfig};

/// Network-ready images for one panorama: `[3, H, W]` tensors in the order
/// the variant expects (cube faces in face order, tiles row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub variant: InputVariant,
    pub images: Vec<Tensor>,
}

/// Converts an interleaved RGB image into a channel-major tensor.
pub fn image_to_tensor(img: &Image) -> Tensor {
    let (w, h) = (img.width(), img.height());
    let mut data = vec![0.0; 3 * w * h];
    for (i, px) in img.data().chunks(3).enumerate() {
        for c in 0..3 {
            data[c * w * h + i] = px[c];
        }
    }
    Tensor::new(vec![3, h, w], data).expect("shape matches data")
}

/// Builds the representation `config` consumes from a panorama.
///
/// Cube faces are projected at twice the input size and area-resampled down,
/// which suppresses aliasing from the point-sampled projection.
pub fn prepare_input(eq: &EquirectImage, config: &ModelConfig) -> Result<ModelInput> {
    let n = config.dims.input_size();
    let variant = config.input_variant;
    let images: Vec<Image> = match variant {
        InputVariant::EqCentralCrop => vec![crop_and_resize(eq, CropMode::CentralCrop, n)?],
        InputVariant::EqResize => vec![crop_and_resize(eq, CropMode::Resize, n)?],
        InputVariant::EqAvgpool => vec![crop_and_resize(eq, CropMode::ShorterSide, n)?],
        InputVariant::DirectSplit => direct_split(eq, n)?,
        InputVariant::CubeAvgpool | InputVariant::CubeTucker | InputVariant::CubeTuckerDiffusion => {
            project_to_cubemaps(eq, 2 * n)?.faces().iter().map(|f| f.resize(n, n)).collect::<Result<_>>()?
        }
    };
    Ok(ModelInput { variant, images: images.iter().map(image_to_tensor).collect() })
}

impl ModelInput {
    pub(crate) fn check(&self, config: &ModelConfig) -> Result<()> {
        let n = config.dims.input_size();
        let expected = match config.input_variant {
            InputVariant::EqAvgpool => [3, n, 2 * n],
            _ => [3, n, n],
        };
        if self.variant != config.input_variant
            || self.images.len() != config.input_variant.num_images()
            || self.images.iter().any(|t| t.shape() != expected)
        {
            return Err(Error::Config(format!(
                "input prepared for {} with {} images does not match model variant {} expecting {:?}",
                self.variant,
                self.images.len(),
                config.input_variant,
                expected
            )));
        }
        Ok(())
    }
}
