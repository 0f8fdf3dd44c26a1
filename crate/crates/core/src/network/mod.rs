//! Generator and discriminator networks and view concatenation.

mod checkpoint;
pub(crate) mod conv_ops;
mod discriminator;
mod generator;
pub mod layers;

use candle_core::Tensor;
use serde::{Deserialize, Serialize};

pub use checkpoint::{checkpoint_id, Checkpoint, NamedTensor, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use discriminator::{
    Discriminator, DiscriminatorBank, DiscriminatorConfig, BANK_HEADS, PATCH_SCALES, SEQUENCE_SCALES,
};
pub use generator::{Generator, GeneratorConfig};
pub use layers::ParamSet;

use crate::error::{Error, Result};
use crate::image::ImageTensor;

/// One block's input and output shape as `(height, width, channels)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub name: String,
    pub input: (usize, usize, usize),
    pub output: (usize, usize, usize),
}

impl LayerShape {
    pub fn new(name: impl Into<String>, input: (usize, usize, usize), output: (usize, usize, usize)) -> Self {
        Self {
            name: name.into(),
            input,
            output,
        }
    }

    pub(crate) fn from_tensors(name: String, input: &Tensor, output: &Tensor) -> Result<Self> {
        let (_, ci, hi, wi) = input.dims4()?;
        let (_, co, ho, wo) = output.dims4()?;
        Ok(Self::new(name, (hi, wi, ci), (ho, wo, co)))
    }
}

/// Joins three equally shaped views side by side (view order left to right).
pub fn concat_views(views: &[ImageTensor; 3]) -> Result<ImageTensor> {
    let (h, w) = views[0].shape();
    if views.iter().any(|v| v.shape() != (h, w)) {
        return Err(Error::Argument(format!(
            "view shapes differ: {:?}",
            views.iter().map(|v| v.shape()).collect::<Vec<_>>()
        )));
    }
    let mut data = Vec::with_capacity(h * 3 * w * 3);
    for y in 0..h {
        for v in views {
            let row = y * w * 3;
            data.extend_from_slice(&v.data()[row..row + w * 3]);
        }
    }
    ImageTensor::new(h, 3 * w, data)
}

pub fn split_views(strip: &ImageTensor) -> Result<[ImageTensor; 3]> {
    let (h, w3) = strip.shape();
    if w3 % 3 != 0 {
        return Err(Error::Argument(format!("strip width {w3} is not a multiple of 3")));
    }
    let w = w3 / 3;
    Ok([strip.crop(0, 0, w, h)?, strip.crop(w, 0, w, h)?, strip.crop(2 * w, 0, w, h)?])
}

/// Tensor-level concatenation along the width axis of `(N, C, H, W)` views.
pub fn concat_view_tensors(views: &[Tensor]) -> Result<Tensor> {
    if views.len() != 3 {
        return Err(Error::Argument(format!("expected 3 views, got {}", views.len())));
    }
    let dims = views[0].dims();
    if views.iter().any(|v| v.dims() != dims) {
        return Err(Error::Argument("view tensors differ in shape".into()));
    }
    Ok(Tensor::cat(views, 3)?)
}

pub fn split_view_tensors(strip: &Tensor) -> Result<[Tensor; 3]> {
    let (_, _, _, w3) = strip.dims4()?;
    if w3 % 3 != 0 {
        return Err(Error::Argument(format!("strip width {w3} is not a multiple of 3")));
    }
    let w = w3 / 3;
    Ok([strip.narrow(3, 0, w)?, strip.narrow(3, w, w)?, strip.narrow(3, 2 * w, w)?])
}
