use candle_core::{DType, Device, Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::conv_ops;
use crate::error::Result;

pub const PIXEL_NORM_EPS: f64 = 1e-8;
pub const LEAKY_SLOPE: f64 = 0.2;

/// Named trainable tensors in a fixed, deterministic order.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    entries: Vec<(String, Var)>,
}

impl ParamSet {
    pub fn push(&mut self, name: impl Into<String>, var: Var) {
        self.entries.push((name.into(), var));
    }

    pub fn extend_prefixed(&mut self, prefix: &str, other: ParamSet) {
        for (name, var) in other.entries {
            self.entries.push((format!("{prefix}.{name}"), var));
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Var)> {
        self.entries.iter().map(|(n, v)| (n.as_str(), v))
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.entries.iter().map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn element_count(&self) -> usize {
        self.entries.iter().map(|(_, v)| v.elem_count()).sum()
    }

    /// All parameters flattened into one `f64` vector, in declaration order.
    pub fn flatten(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.element_count());
        for v in self.vars() {
            out.extend(v.as_tensor().flatten_all()?.to_dtype(DType::F64)?.to_vec1::<f64>()?);
        }
        Ok(out)
    }
}

pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn uniform_tensor(
    shape: &[usize],
    bound: f64,
    rng: &mut ChaCha8Rng,
    dtype: DType,
    device: &Device,
) -> Result<Tensor> {
    let n: usize = shape.iter().product();
    let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
    Ok(Tensor::from_vec(values, shape, device)?.to_dtype(dtype)?)
}

/// Square-kernel 2-D convolution with bias.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: Var,
    pub bias: Var,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2d {
    pub fn new(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        dtype: DType,
        device: &Device,
    ) -> Result<Self> {
        Ok(Self {
            weight: Var::zeros((c_out, c_in, kernel, kernel), dtype, device)?,
            bias: Var::zeros(c_out, dtype, device)?,
            stride,
            padding,
        })
    }

    pub fn c_in(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn c_out(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn kernel(&self) -> usize {
        self.weight.dims()[2]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = conv_ops::conv2d(x, self.weight.as_tensor(), self.stride, self.padding)?;
        let b = self.bias.as_tensor().reshape((1, self.c_out(), 1, 1))?;
        Ok(y.broadcast_add(&b)?)
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init(&self, rng: &mut ChaCha8Rng) -> Result<()> {
        let k2 = self.kernel() * self.kernel();
        let bound = xavier_bound(self.c_in() * k2, self.c_out() * k2);
        let w = uniform_tensor(self.weight.dims(), bound, rng, self.weight.dtype(), self.weight.device())?;
        self.weight.set(&w)?;
        self.bias.set(&self.bias.zeros_like()?)?;
        Ok(())
    }

    pub fn params(&self) -> ParamSet {
        let mut p = ParamSet::default();
        p.push("weight", self.weight.clone());
        p.push("bias", self.bias.clone());
        p
    }

    pub fn out_size(&self, n: usize) -> usize {
        (n + 2 * self.padding - self.kernel()) / self.stride + 1
    }
}

/// Transposed convolution with bias; weight layout `(c_in, c_out, k, k)`.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d {
    pub weight: Var,
    pub bias: Var,
    pub stride: usize,
    pub padding: usize,
}

impl ConvTranspose2d {
    pub fn new(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        dtype: DType,
        device: &Device,
    ) -> Result<Self> {
        Ok(Self {
            weight: Var::zeros((c_in, c_out, kernel, kernel), dtype, device)?,
            bias: Var::zeros(c_out, dtype, device)?,
            stride,
            padding,
        })
    }

    pub fn c_in(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn c_out(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn kernel(&self) -> usize {
        self.weight.dims()[2]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = conv_ops::conv_transpose2d(x, self.weight.as_tensor(), self.stride, self.padding)?;
        let b = self.bias.as_tensor().reshape((1, self.c_out(), 1, 1))?;
        Ok(y.broadcast_add(&b)?)
    }

    pub fn init(&self, rng: &mut ChaCha8Rng) -> Result<()> {
        let k2 = self.kernel() * self.kernel();
        let bound = xavier_bound(self.c_in() * k2, self.c_out() * k2);
        let w = uniform_tensor(self.weight.dims(), bound, rng, self.weight.dtype(), self.weight.device())?;
        self.weight.set(&w)?;
        self.bias.set(&self.bias.zeros_like()?)?;
        Ok(())
    }

    pub fn params(&self) -> ParamSet {
        let mut p = ParamSet::default();
        p.push("weight", self.weight.clone());
        p.push("bias", self.bias.clone());
        p
    }

    pub fn out_size(&self, n: usize) -> usize {
        (n - 1) * self.stride + self.kernel() - 2 * self.padding
    }
}

/// Rescales each spatial position's channel vector to unit RMS.
pub fn pixel_norm(x: &Tensor) -> Result<Tensor> {
    let denom = (x.sqr()?.mean_keepdim(1)? + PIXEL_NORM_EPS)?.sqrt()?;
    Ok(x.broadcast_div(&denom)?)
}

pub fn leaky_relu(x: &Tensor) -> Result<Tensor> {
    Ok(x.maximum(&(x * LEAKY_SLOPE)?)?)
}

/// 2x2 average pooling, the area downsampling used between discriminator scales.
pub fn downsample(x: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 1 {
        return Ok(x.clone());
    }
    Ok(x.avg_pool2d(factor)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn pixel_norm_unit_rms() {
        let dev = Device::Cpu;
        let x = Tensor::randn(0f32, 3.0, (1, 7, 5, 4), &dev).unwrap();
        let y = pixel_norm(&x).unwrap();
        let rms = y.sqr().unwrap().mean_keepdim(1).unwrap().sqrt().unwrap();
        for v in rms.flatten_all().unwrap().to_vec1::<f32>().unwrap() {
            assert!((v - 1.0).abs() < 1e-5, "rms {v}");
        }
    }

    #[test]
    fn leaky_relu_slope() {
        let x = Tensor::new(&[-2f32, 0.0, 3.0], &Device::Cpu).unwrap();
        let y = leaky_relu(&x).unwrap().to_vec1::<f32>().unwrap();
        assert_eq!(y, vec![-0.4, 0.0, 3.0]);
    }

    #[test]
    fn glorot_range_for_square_layer() {
        // fan_in = fan_out = n gives a bound of sqrt(6 / 2n)
        let dev = Device::Cpu;
        let conv = Conv2d::new(8, 8, 3, 1, 1, DType::F64, &dev).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        conv.init(&mut rng).unwrap();
        let n = 8 * 9;
        let bound = (6.0 / (2.0 * n as f64)).sqrt();
        let w = conv.weight.flatten_all().unwrap().to_vec1::<f64>().unwrap();
        assert!(w.iter().all(|v| v.abs() <= bound));
        let max = w.iter().fold(0f64, |m, v| m.max(v.abs()));
        assert!(max > 0.9 * bound);
        let b = conv.bias.flatten_all().unwrap().to_vec1::<f64>().unwrap();
        assert!(b.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn conv_shape_arithmetic() {
        let dev = Device::Cpu;
        let conv = Conv2d::new(3, 4, 4, 2, 1, DType::F32, &dev).unwrap();
        let up = ConvTranspose2d::new(4, 3, 4, 2, 1, DType::F32, &dev).unwrap();
        let x = Tensor::zeros((1, 3, 16, 48), DType::F32, &dev).unwrap();
        let y = conv.forward(&x).unwrap();
        assert_eq!(y.dims(), &[1, 4, 8, 24]);
        assert_eq!(conv.out_size(16), 8);
        let z = up.forward(&y).unwrap();
        assert_eq!(z.dims(), &[1, 3, 16, 48]);
        assert_eq!(up.out_size(8), 16);
    }
}
