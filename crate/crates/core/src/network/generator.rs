use candle_core::{DType, Device, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{leaky_relu, pixel_norm, Conv2d, ConvTranspose2d, ParamSet};
use super::LayerShape;
use crate::error::{Error, Result};

/// U-Net generator over a width-wise concatenated view triplet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Per-view height in pixels.
    pub height: usize,
    /// Per-view width in pixels; the network sees `3 * width`.
    pub width: usize,
    /// Number of stride-2 encoder levels.
    pub depth: usize,
    pub base_channels: usize,
    pub max_channels: usize,
}

impl GeneratorConfig {
    /// Depth chosen so the bottleneck has spatial height 1.
    pub fn for_resolution(height: usize, width: usize, base_channels: usize) -> Result<Self> {
        if height == 0 || !height.is_power_of_two() {
            return Err(Error::Config(format!(
                "view height {height} must be a power of two to reach a height-1 bottleneck"
            )));
        }
        let cfg = Self {
            height,
            width,
            depth: height.trailing_zeros() as usize,
            base_channels,
            max_channels: 8 * base_channels,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The 512-pixel configuration with a C64-C128-C256-C512x6 encoder.
    pub fn full_scale() -> Self {
        Self {
            height: 512,
            width: 512,
            depth: 9,
            base_channels: 64,
            max_channels: 512,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::Config(format!("generator depth {} < 2", self.depth)));
        }
        if self.base_channels == 0 || self.max_channels < self.base_channels {
            return Err(Error::Config(format!(
                "invalid channel bounds base={} max={}",
                self.base_channels, self.max_channels
            )));
        }
        let f = 1usize << self.depth;
        if self.height % f != 0 || (3 * self.width) % f != 0 {
            return Err(Error::Config(format!(
                "input {}x{} not divisible by 2^{} = {f}",
                self.height,
                3 * self.width,
                self.depth
            )));
        }
        Ok(())
    }

    /// Output channels of each encoder level.
    pub fn channel_schedule(&self) -> Vec<usize> {
        (0..self.depth)
            .map(|i| (self.base_channels << i.min(30)).min(self.max_channels))
            .collect()
    }

    /// `(in_channels, out_channels)` of decoder block `j`, counting from the bottleneck.
    ///
    /// Blocks 1..depth-2 receive the matching encoder level concatenated onto the
    /// upsampled features; the outermost encoder level is not skipped.
    fn decoder_channels(&self, j: usize) -> (usize, usize) {
        let ch = self.channel_schedule();
        let d = self.depth;
        let c_out = if j == d - 1 { 3 } else { ch[d - 2 - j] };
        let c_in = if j == 0 {
            ch[d - 1]
        } else if j == d - 1 {
            ch[0]
        } else {
            ch[d - 1 - j] + ch[d - 1 - j]
        };
        (c_in, c_out)
    }

    /// Block-by-block shapes for a `(height, 3 * width, 3)` input, no computation.
    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        let ch = self.channel_schedule();
        let mut out = Vec::new();
        let (mut h, mut w, mut c) = (self.height, 3 * self.width, 3);
        for (i, &co) in ch.iter().enumerate() {
            let next = (h / 2, w / 2, co);
            out.push(LayerShape::new(format!("enc{i}"), (h, w, c), next));
            (h, w, c) = next;
        }
        for j in 0..self.depth {
            let (ci, co) = self.decoder_channels(j);
            let next = (h * 2, w * 2, co);
            out.push(LayerShape::new(format!("dec{j}"), (h, w, ci), next));
            (h, w, c) = next;
        }
        debug_assert_eq!(c, 3);
        out
    }
}

#[derive(Debug, Clone)]
struct DecoderBlock {
    up: ConvTranspose2d,
    refine: Conv2d,
}

#[derive(Debug, Clone)]
pub struct Generator {
    config: GeneratorConfig,
    encoder: Vec<Conv2d>,
    decoder: Vec<DecoderBlock>,
}

impl Generator {
    pub fn new(config: GeneratorConfig, dtype: DType, device: &Device) -> Result<Self> {
        config.validate()?;
        let mut encoder = Vec::with_capacity(config.depth);
        let mut c_in = 3;
        for co in config.channel_schedule() {
            encoder.push(Conv2d::new(c_in, co, 4, 2, 1, dtype, device)?);
            c_in = co;
        }
        let mut decoder = Vec::with_capacity(config.depth);
        for j in 0..config.depth {
            let (ci, co) = config.decoder_channels(j);
            decoder.push(DecoderBlock {
                up: ConvTranspose2d::new(ci, co, 4, 2, 1, dtype, device)?,
                refine: Conv2d::new(co, co, 3, 1, 1, dtype, device)?,
            });
        }
        Ok(Self {
            config,
            encoder,
            decoder,
        })
    }

    /// Builds and Glorot-initializes in one go.
    pub fn seeded(config: GeneratorConfig, seed: u64, dtype: DType, device: &Device) -> Result<Self> {
        let g = Self::new(config, dtype, device)?;
        g.init_weights(seed)?;
        Ok(g)
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn init_weights(&self, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for conv in &self.encoder {
            conv.init(&mut rng)?;
        }
        for block in &self.decoder {
            block.up.init(&mut rng)?;
            block.refine.init(&mut rng)?;
        }
        Ok(())
    }

    pub fn params(&self) -> ParamSet {
        let mut p = ParamSet::default();
        for (i, conv) in self.encoder.iter().enumerate() {
            p.extend_prefixed(&format!("enc{i}"), conv.params());
        }
        for (j, block) in self.decoder.iter().enumerate() {
            p.extend_prefixed(&format!("dec{j}.up"), block.up.params());
            p.extend_prefixed(&format!("dec{j}.refine"), block.refine.params());
        }
        p
    }

    /// The final stride-1 convolution feeding the tanh.
    pub fn output_layer(&self) -> &Conv2d {
        &self.decoder.last().expect("depth >= 2").refine
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let (_, c, h, w) = x.dims4()?;
        let f = 1usize << self.config.depth;
        if c != 3 || h % f != 0 || w % f != 0 || h == 0 || w == 0 {
            return Err(Error::Config(format!(
                "generator input (c={c}, h={h}, w={w}) must have 3 channels and spatial dims divisible by {f}"
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.run(x, None)
    }

    /// Forward pass that records every block's input/output shape.
    pub fn forward_traced(&self, x: &Tensor) -> Result<(Tensor, Vec<LayerShape>)> {
        let mut trace = Vec::new();
        let y = self.run(x, Some(&mut trace))?;
        Ok((y, trace))
    }

    fn run(&self, x: &Tensor, mut trace: Option<&mut Vec<LayerShape>>) -> Result<Tensor> {
        self.check_input(x)?;
        let depth = self.config.depth;
        let mut skips = Vec::with_capacity(depth);
        let mut h = x.clone();
        for (i, conv) in self.encoder.iter().enumerate() {
            let y = conv.forward(&h)?;
            let y = if i == 0 {
                leaky_relu(&y)?
            } else if i == depth - 1 {
                y.relu()?
            } else {
                leaky_relu(&pixel_norm(&y)?)?
            };
            if let Some(t) = trace.as_deref_mut() {
                t.push(LayerShape::from_tensors(format!("enc{i}"), &h, &y)?);
            }
            skips.push(y.clone());
            h = y;
        }
        for (j, block) in self.decoder.iter().enumerate() {
            let input = if j == 0 || j == depth - 1 {
                h
            } else {
                Tensor::cat(&[&h, &skips[depth - 1 - j]], 1)?
            };
            let y = block.refine.forward(&block.up.forward(&input)?)?;
            let y = if j == depth - 1 {
                y.tanh()?
            } else {
                pixel_norm(&y)?.relu()?
            };
            if let Some(t) = trace.as_deref_mut() {
                t.push(LayerShape::from_tensors(format!("dec{j}"), &input, &y)?);
            }
            h = y;
        }
        Ok(h)
    }
}
