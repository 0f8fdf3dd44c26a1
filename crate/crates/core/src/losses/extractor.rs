//! Frozen feature extractors for the perceptual losses.

use std::collections::BTreeMap;
use std::sync::Arc;

use candle_core::{DType, Device, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::conv_ops;
use crate::network::layers::{downsample, leaky_relu, xavier_bound};

/// Maps an image batch `(N, 3, H, W)` to a list of activation tensors, one per cited layer.
///
/// Implementations hold no trainable state; gradients flow through to the input only.
pub trait FeatureExtractor: Send + Sync {
    fn name(&self) -> &str;

    fn num_layers(&self) -> usize;

    fn extract(&self, x: &Tensor) -> Result<Vec<Tensor>>;
}

/// Fixed weights seed of the default pyramid extractor.
pub const PYRAMID_SEED: u64 = 0x5eed_0f_a7;
pub const PYRAMID_CHANNELS: [usize; 4] = [16, 32, 64, 64];

#[derive(Debug, Clone)]
struct FrozenConv {
    weight: Tensor,
    bias: Tensor,
    stride: usize,
}

/// Stack of 3x3 convolutions, each followed by LeakyReLU; every level's output is cited.
#[derive(Debug, Clone)]
pub struct PyramidExtractor {
    levels: Vec<FrozenConv>,
}

impl PyramidExtractor {
    /// Four levels of 16/32/64/64 channels; level 0 keeps resolution, later levels halve it.
    pub fn standard(dtype: DType, device: &Device) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(PYRAMID_SEED);
        let mut levels = Vec::with_capacity(PYRAMID_CHANNELS.len());
        let mut c_in = 3;
        for (i, &c_out) in PYRAMID_CHANNELS.iter().enumerate() {
            let bound = xavier_bound(c_in * 9, c_out * 9);
            let values: Vec<f64> = (0..c_out * c_in * 9).map(|_| rng.gen_range(-bound..=bound)).collect();
            levels.push(FrozenConv {
                weight: Tensor::from_vec(values, (c_out, c_in, 3, 3), device)?.to_dtype(dtype)?,
                bias: Tensor::zeros((1, c_out, 1, 1), dtype, device)?,
                stride: if i == 0 { 1 } else { 2 },
            });
            c_in = c_out;
        }
        Ok(Self { levels })
    }

    /// Builds an extractor from explicit `(weight, stride)` levels with zero biases.
    pub fn from_weights(levels: Vec<(Tensor, usize)>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Config("extractor needs at least one level".into()));
        }
        let levels = levels
            .into_iter()
            .map(|(weight, stride)| {
                let (c_out, _, k, _) = weight.dims4()?;
                if k % 2 == 0 {
                    return Err(Error::Config(format!("extractor kernels must be odd, got {k}")));
                }
                let bias = Tensor::zeros((1, c_out, 1, 1), weight.dtype(), weight.device())?;
                Ok(FrozenConv { weight, bias, stride })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { levels })
    }

    /// Same levels listed twice; used to check that the loss is a plain sum over layers.
    pub fn duplicated(&self) -> DuplicatedLayers<'_> {
        DuplicatedLayers(self)
    }
}

impl FeatureExtractor for PyramidExtractor {
    fn name(&self) -> &str {
        "pyramid"
    }

    fn num_layers(&self) -> usize {
        self.levels.len()
    }

    fn extract(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let mut out = Vec::with_capacity(self.levels.len());
        let mut cur = x.clone();
        for level in &self.levels {
            let pad = level.weight.dim(2)? / 2;
            let y = conv_ops::conv2d(&cur, &level.weight, level.stride, pad)?.broadcast_add(&level.bias)?;
            let y = leaky_relu(&y)?;
            out.push(y.clone());
            cur = y;
        }
        Ok(out)
    }
}

pub struct DuplicatedLayers<'a>(&'a PyramidExtractor);

impl FeatureExtractor for DuplicatedLayers<'_> {
    fn name(&self) -> &str {
        "duplicated"
    }

    fn num_layers(&self) -> usize {
        2 * self.0.num_layers()
    }

    fn extract(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let layers = self.0.extract(x)?;
        Ok(layers.iter().chain(layers.iter()).cloned().collect())
    }
}

/// Raw pixels plus a 2x area-downsampled copy.
#[derive(Debug, Clone, Default)]
pub struct PixelExtractor;

impl FeatureExtractor for PixelExtractor {
    fn name(&self) -> &str {
        "pixels"
    }

    fn num_layers(&self) -> usize {
        2
    }

    fn extract(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        Ok(vec![x.clone(), downsample(x, 2)?])
    }
}

type ActivationFn = dyn Fn(&Tensor) -> Result<Vec<Tensor>> + Send + Sync;

/// Adapter for externally supplied activations, e.g. a pretrained VGG evaluated elsewhere.
pub struct ActivationAdapter {
    name: String,
    layers: usize,
    f: Box<ActivationFn>,
}

impl ActivationAdapter {
    pub fn new(
        name: impl Into<String>,
        layers: usize,
        f: impl Fn(&Tensor) -> Result<Vec<Tensor>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            layers,
            f: Box::new(f),
        }
    }
}

impl FeatureExtractor for ActivationAdapter {
    fn name(&self) -> &str {
        &self.name
    }

    fn num_layers(&self) -> usize {
        self.layers
    }

    fn extract(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let out = (self.f)(x)?;
        if out.len() != self.layers {
            return Err(Error::Config(format!(
                "extractor `{}` declared {} layers but produced {}",
                self.name,
                self.layers,
                out.len()
            )));
        }
        Ok(out)
    }
}

type ExtractorCtor = fn(DType, &Device) -> Result<Arc<dyn FeatureExtractor>>;

/// Extractors selectable by name from configuration.
pub struct ExtractorRegistry {
    entries: BTreeMap<&'static str, ExtractorCtor>,
}

impl Default for ExtractorRegistry {
    fn default() -> Self {
        let mut r = Self {
            entries: BTreeMap::new(),
        };
        r.register("pyramid", |dtype, dev| Ok(Arc::new(PyramidExtractor::standard(dtype, dev)?)));
        r.register("pixels", |_, _| Ok(Arc::new(PixelExtractor)));
        r
    }
}

impl ExtractorRegistry {
    pub fn register(&mut self, name: &'static str, ctor: ExtractorCtor) {
        self.entries.insert(name, ctor);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn build(&self, name: &str, dtype: DType, device: &Device) -> Result<Arc<dyn FeatureExtractor>> {
        let ctor = self.entries.get(name).ok_or_else(|| {
            Error::Config(format!("unknown feature extractor `{name}` (known: {})", self.names().join(", ")))
        })?;
        ctor(dtype, device)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pyramid_resolution_strictly_decreases_after_first_level() {
        let f = PyramidExtractor::standard(DType::F32, &Device::Cpu).unwrap();
        let x = Tensor::randn(0f32, 1.0, (1, 3, 32, 32), &Device::Cpu).unwrap();
        let layers = f.extract(&x).unwrap();
        let dims: Vec<_> = layers.iter().map(|t| t.dims().to_vec()).collect();
        assert_eq!(dims, vec![vec![1, 16, 32, 32], vec![1, 32, 16, 16], vec![1, 64, 8, 8], vec![1, 64, 4, 4]]);
    }

    #[test]
    fn pyramid_is_deterministic() {
        let a = PyramidExtractor::standard(DType::F32, &Device::Cpu).unwrap();
        let b = PyramidExtractor::standard(DType::F32, &Device::Cpu).unwrap();
        let x = Tensor::randn(0f32, 1.0, (1, 3, 16, 16), &Device::Cpu).unwrap();
        let la = a.extract(&x).unwrap();
        let lb = b.extract(&x).unwrap();
        for (p, q) in la.iter().zip(&lb) {
            assert_eq!(p.flatten_all().unwrap().to_vec1::<f32>().unwrap(), q.flatten_all().unwrap().to_vec1::<f32>().unwrap());
        }
    }

    #[test]
    fn registry_lookup() {
        let r = ExtractorRegistry::default();
        assert_eq!(r.build("pyramid", DType::F32, &Device::Cpu).unwrap().num_layers(), 4);
        assert!(matches!(r.build("vgg19", DType::F32, &Device::Cpu), Err(Error::Config(_))));
    }

    #[test]
    fn adapter_checks_layer_count() {
        let a = ActivationAdapter::new("external", 3, |x| Ok(vec![x.clone()]));
        let x = Tensor::zeros((1, 3, 4, 4), DType::F32, &Device::Cpu).unwrap();
        assert!(a.extract(&x).is_err());
    }
}
