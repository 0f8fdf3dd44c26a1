use candle_core::{DType, Device, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{downsample, leaky_relu, pixel_norm, Conv2d, ParamSet};
use super::LayerShape;
use crate::error::{Error, Result};

/// Downsampling factors of the three sequence heads.
pub const SEQUENCE_SCALES: [usize; 3] = [1, 2, 4];
/// Downsampling factors of the two patch-strip heads.
pub const PATCH_SCALES: [usize; 2] = [1, 2];
pub const BANK_HEADS: usize = SEQUENCE_SCALES.len() + PATCH_SCALES.len();

/// Stack of stride-2 4x4 convolutions ending in a single-channel score map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub base_channels: usize,
    pub max_channels: usize,
    /// Number of stride-2 convolutions including the 1-channel output layer.
    pub layers: usize,
}

impl Default for DiscriminatorConfig {
    /// C64-C128-C256-C512-C1.
    fn default() -> Self {
        Self {
            base_channels: 64,
            max_channels: 512,
            layers: 5,
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::Config("discriminator needs at least one layer".into()));
        }
        if self.base_channels == 0 || self.max_channels < self.base_channels {
            return Err(Error::Config(format!(
                "invalid channel bounds base={} max={}",
                self.base_channels, self.max_channels
            )));
        }
        Ok(())
    }

    pub fn channel_schedule(&self) -> Vec<usize> {
        let mut ch: Vec<usize> = (0..self.layers - 1)
            .map(|i| (self.base_channels << i.min(30)).min(self.max_channels))
            .collect();
        ch.push(1);
        ch
    }

    /// Smallest spatial extent that survives every stride-2 layer.
    pub fn min_input(&self) -> usize {
        1 << self.layers
    }

    pub fn check_input(&self, h: usize, w: usize) -> Result<()> {
        let f = self.min_input();
        if h < f || w < f || h % f != 0 || w % f != 0 {
            return Err(Error::Config(format!(
                "discriminator input {h}x{w} must be a multiple of {f} in both dimensions"
            )));
        }
        Ok(())
    }

    pub fn layer_shapes(&self, h: usize, w: usize) -> Vec<LayerShape> {
        let mut out = Vec::new();
        let (mut h, mut w, mut c) = (h, w, 3);
        for (i, co) in self.channel_schedule().into_iter().enumerate() {
            let next = (h / 2, w / 2, co);
            out.push(LayerShape::new(format!("conv{i}"), (h, w, c), next));
            (h, w, c) = next;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Discriminator {
    config: DiscriminatorConfig,
    convs: Vec<Conv2d>,
}

impl Discriminator {
    pub fn new(config: DiscriminatorConfig, dtype: DType, device: &Device) -> Result<Self> {
        config.validate()?;
        let mut convs = Vec::with_capacity(config.layers);
        let mut c_in = 3;
        for co in config.channel_schedule() {
            convs.push(Conv2d::new(c_in, co, 4, 2, 1, dtype, device)?);
            c_in = co;
        }
        Ok(Self { config, convs })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    pub fn init_with(&self, rng: &mut ChaCha8Rng) -> Result<()> {
        for c in &self.convs {
            c.init(rng)?;
        }
        Ok(())
    }

    pub fn init_weights(&self, seed: u64) -> Result<()> {
        self.init_with(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn params(&self) -> ParamSet {
        let mut p = ParamSet::default();
        for (i, conv) in self.convs.iter().enumerate() {
            p.extend_prefixed(&format!("conv{i}"), conv.params());
        }
        p
    }

    pub fn convs(&self) -> &[Conv2d] {
        &self.convs
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward_traced(x)?.0)
    }

    pub fn forward_traced(&self, x: &Tensor) -> Result<(Tensor, Vec<LayerShape>)> {
        let (_, _, h, w) = x.dims4()?;
        self.config.check_input(h, w)?;
        let last = self.convs.len() - 1;
        let mut trace = Vec::with_capacity(self.convs.len());
        let mut cur = x.clone();
        for (i, conv) in self.convs.iter().enumerate() {
            let y = conv.forward(&cur)?;
            let y = if i == last {
                y
            } else if i == 0 {
                leaky_relu(&y)?
            } else {
                leaky_relu(&pixel_norm(&y)?)?
            };
            trace.push(LayerShape::from_tensors(format!("conv{i}"), &cur, &y)?);
            cur = y;
        }
        Ok((cur, trace))
    }
}

/// Five discriminators per domain: three see the view sequence at scales 1, 1/2, 1/4
/// and two see the correspondence patch strip at scales 1, 1/2.
#[derive(Debug, Clone)]
pub struct DiscriminatorBank {
    heads: Vec<Discriminator>,
}

impl DiscriminatorBank {
    pub fn new(config: DiscriminatorConfig, dtype: DType, device: &Device) -> Result<Self> {
        let heads = (0..BANK_HEADS)
            .map(|_| Discriminator::new(config.clone(), dtype, device))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { heads })
    }

    pub fn seeded(config: DiscriminatorConfig, seed: u64, dtype: DType, device: &Device) -> Result<Self> {
        let bank = Self::new(config, dtype, device)?;
        bank.init_weights(seed)?;
        Ok(bank)
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        self.heads[0].config()
    }

    pub fn heads(&self) -> &[Discriminator] {
        &self.heads
    }

    pub fn init_weights(&self, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for head in &self.heads {
            head.init_with(&mut rng)?;
        }
        Ok(())
    }

    pub fn params(&self) -> ParamSet {
        let mut p = ParamSet::default();
        for (i, head) in self.heads.iter().enumerate() {
            p.extend_prefixed(&format!("head{i}"), head.params());
        }
        p
    }

    /// Verifies every head will receive a valid input for these sizes.
    pub fn check_sizes(&self, seq_hw: (usize, usize), strip_hw: (usize, usize)) -> Result<()> {
        let cfg = self.config();
        for s in SEQUENCE_SCALES {
            if seq_hw.0 % s != 0 || seq_hw.1 % s != 0 {
                return Err(Error::Config(format!("sequence {seq_hw:?} not divisible by scale {s}")));
            }
            cfg.check_input(seq_hw.0 / s, seq_hw.1 / s)
                .map_err(|e| Error::Config(format!("sequence head at 1/{s}: {e}")))?;
        }
        for s in PATCH_SCALES {
            if strip_hw.0 % s != 0 || strip_hw.1 % s != 0 {
                return Err(Error::Config(format!("patch strip {strip_hw:?} not divisible by scale {s}")));
            }
            cfg.check_input(strip_hw.0 / s, strip_hw.1 / s)
                .map_err(|e| Error::Config(format!("patch head at 1/{s}: {e}")))?;
        }
        Ok(())
    }

    /// Score maps in head order: sequence 1, 1/2, 1/4, then patches 1, 1/2.
    pub fn forward(&self, sequence: &Tensor, patch_strip: &Tensor) -> Result<Vec<Tensor>> {
        let (_, _, sh, sw) = sequence.dims4()?;
        let (_, _, ph, pw) = patch_strip.dims4()?;
        self.check_sizes((sh, sw), (ph, pw))?;
        let mut maps = Vec::with_capacity(BANK_HEADS);
        for (head, s) in self.heads.iter().zip(SEQUENCE_SCALES) {
            maps.push(head.forward(&downsample(sequence, s)?)?);
        }
        for (head, s) in self.heads[SEQUENCE_SCALES.len()..].iter().zip(PATCH_SCALES) {
            maps.push(head.forward(&downsample(patch_strip, s)?)?);
        }
        Ok(maps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_shape_at_64() {
        let d = Discriminator::new(DiscriminatorConfig::default(), DType::F32, &Device::Cpu).unwrap();
        d.init_weights(0).unwrap();
        let x = Tensor::zeros((1, 3, 64, 192), DType::F32, &Device::Cpu).unwrap();
        assert_eq!(d.forward(&x).unwrap().dims(), &[1, 1, 2, 6]);
    }

    #[test]
    fn zero_weights_give_bias_map() {
        let d = Discriminator::new(DiscriminatorConfig { base_channels: 4, max_channels: 16, layers: 3 }, DType::F32, &Device::Cpu)
            .unwrap();
        let last = d.convs().last().unwrap();
        last.bias.set(&Tensor::new(&[0.75f32], &Device::Cpu).unwrap()).unwrap();
        let x = Tensor::randn(0f32, 1.0, (1, 3, 16, 48), &Device::Cpu).unwrap();
        let y = d.forward(&x).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert_eq!(y.len(), 2 * 6);
        assert!(y.iter().all(|v| *v == 0.75));
    }

    #[test]
    fn rejects_too_small_input() {
        let d = Discriminator::new(DiscriminatorConfig::default(), DType::F32, &Device::Cpu).unwrap();
        let x = Tensor::zeros((1, 3, 16, 48), DType::F32, &Device::Cpu).unwrap();
        assert!(matches!(d.forward(&x), Err(Error::Config(_))));
    }

    #[test]
    fn bank_heads_have_independent_parameters() {
        let cfg = DiscriminatorConfig { base_channels: 2, max_channels: 4, layers: 3 };
        let bank = DiscriminatorBank::seeded(cfg, 9, DType::F32, &Device::Cpu).unwrap();
        assert_eq!(bank.heads().len(), 5);
        let a = bank.heads()[0].params().flatten().unwrap();
        let b = bank.heads()[1].params().flatten().unwrap();
        assert_eq!(a.len(), b.len());
        assert_ne!(a, b);
    }
}
