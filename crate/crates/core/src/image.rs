//! Float RGB images normalized to `[-1, 1]`, stored row-major HWC.

use std::path::Path;

use candle_core::{DType, Device, Tensor};

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * CHANNELS {
            return Err(Error::Argument(format!(
                "buffer of {} values does not hold a {height}x{width}x3 image",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for _ in 0..height * width {
            data.extend_from_slice(&rgb);
        }
        Self {
            height,
            width,
            data,
        }
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * CHANNELS;
        self.data[i..i + CHANNELS].copy_from_slice(&rgb);
    }

    pub fn is_normalized(&self) -> bool {
        self.data.iter().all(|v| v.is_finite() && (-1.0..=1.0).contains(v))
    }

    /// Luminance in `[0, 1]` using the 0.299/0.587/0.114 weights.
    pub fn luminance(&self) -> Vec<f32> {
        self.data
            .chunks_exact(CHANNELS)
            .map(|p| {
                let l = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
                (l + 1.0) * 0.5
            })
            .collect()
    }

    /// Axis-aligned crop; the window must lie inside the image.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::Argument(format!(
                "crop {width}x{height} at ({x0}, {y0}) exceeds {}x{} image",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in y0..y0 + height {
            let row = (y * self.width + x0) * CHANNELS;
            data.extend_from_slice(&self.data[row..row + width * CHANNELS]);
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// `(1, 3, H, W)` tensor.
    pub fn to_tensor(&self, dtype: DType, device: &Device) -> Result<Tensor> {
        let t = Tensor::from_slice(&self.data, (self.height, self.width, CHANNELS), device)?
            .permute((2, 0, 1))?
            .unsqueeze(0)?
            .to_dtype(dtype)?
            .contiguous()?;
        Ok(t)
    }

    /// Accepts `(1, 3, H, W)` or `(3, H, W)`.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let t = match t.rank() {
            4 => t.squeeze(0)?,
            3 => t.clone(),
            r => return Err(Error::Argument(format!("expected a rank 3/4 image tensor, got rank {r}"))),
        };
        let (c, h, w) = t.dims3()?;
        if c != CHANNELS {
            return Err(Error::Argument(format!("expected 3 channels, got {c}")));
        }
        let data = t
            .permute((1, 2, 0))?
            .to_dtype(DType::F32)?
            .flatten_all()?
            .to_vec1::<f32>()?;
        Self::new(h, w, data)
    }

    /// Maps `[-1, 1]` to 8-bit with rounding; out-of-range values saturate.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| to_u8(v)).collect()
    }

    pub fn from_rgb8(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| from_u8(b)).collect();
        Self::new(height, width, data)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        image::save_buffer(
            path,
            &self.to_rgb8(),
            self.width as u32,
            self.height as u32,
            image::ColorType::Rgb8,
        )
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })?
            .to_rgb8();
        let (w, h) = img.dimensions();
        Self::from_rgb8(h as usize, w as usize, img.as_raw())
    }
}

pub fn to_u8(v: f32) -> u8 {
    (((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round()) as u8
}

pub fn from_u8(b: u8) -> f32 {
    b as f32 / 127.5 - 1.0
}
