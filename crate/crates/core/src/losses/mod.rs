//! Training objectives: perceptual, correspondence, cycle, and least-squares adversarial losses.
//!
//! Every loss returns a rank-0 tensor so it can be differentiated; use [`scalar`]
//! to read the value.

mod extractor;

use candle_core::{DType, Tensor};
use serde::{Deserialize, Serialize};

pub use extractor::{
    ActivationAdapter, DuplicatedLayers, ExtractorRegistry, FeatureExtractor, PixelExtractor, PyramidExtractor,
    PYRAMID_CHANNELS, PYRAMID_SEED,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_adv: f64,
    pub lambda_cyc: f64,
    pub lambda_corr: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_adv: 1.0,
            lambda_cyc: 10.0,
            lambda_corr: 5.0,
        }
    }
}

impl LossWeights {
    pub fn new(lambda_adv: f64, lambda_cyc: f64, lambda_corr: f64) -> Result<Self> {
        let w = Self {
            lambda_adv,
            lambda_cyc,
            lambda_corr,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_adv", self.lambda_adv),
            ("lambda_cyc", self.lambda_cyc),
            ("lambda_corr", self.lambda_corr),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a finite non-negative number, got {v}")));
            }
        }
        Ok(())
    }
}

pub fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?)
}

fn check_same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Argument(format!("{what}: shapes {:?} and {:?} differ", a.dims(), b.dims())));
    }
    Ok(())
}

/// Element-mean absolute difference.
pub fn l1_mean(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_same_shape(a, b, "l1")?;
    Ok((a - b)?.abs()?.mean_all()?)
}

fn perceptual_from_layers(fa: &[Tensor], fb: &[Tensor]) -> Result<Tensor> {
    let mut terms = fa.iter().zip(fb).map(|(p, q)| l1_mean(p, q));
    let first = terms.next().ok_or_else(|| Error::Config("extractor produced no layers".into()))??;
    terms.try_fold(first, |acc, t| Ok(acc.add(&t?)?))
}

/// Sum over cited layers of the size-normalized L1 distance between activations.
pub fn vgg_perceptual(f: &dyn FeatureExtractor, x: &Tensor, x_hat: &Tensor) -> Result<Tensor> {
    check_same_shape(x, x_hat, "perceptual loss")?;
    perceptual_from_layers(&f.extract(x)?, &f.extract(x_hat)?)
}

/// Perceptual distance summed over the three unordered pairs of patches.
///
/// Activations are computed once per patch.
pub fn correspondence_loss(f: &dyn FeatureExtractor, patches: [&Tensor; 3]) -> Result<Tensor> {
    check_same_shape(patches[0], patches[1], "correspondence loss")?;
    check_same_shape(patches[0], patches[2], "correspondence loss")?;
    let feats = patches.iter().map(|p| f.extract(p)).collect::<Result<Vec<_>>>()?;
    let a = perceptual_from_layers(&feats[0], &feats[1])?;
    let b = perceptual_from_layers(&feats[1], &feats[2])?;
    let c = perceptual_from_layers(&feats[0], &feats[2])?;
    Ok(((a + b)? + c)?)
}

/// `|G_A(G_B(X)) - X| + |G_B(G_A(Y)) - Y|`, each L1 term averaged per element.
///
/// `g_b` maps domain A to B and `g_a` maps B back to A.
pub fn cycle_loss<A, B>(g_a: A, g_b: B, x: &Tensor, y: &Tensor) -> Result<Tensor>
where
    A: Fn(&Tensor) -> Result<Tensor>,
    B: Fn(&Tensor) -> Result<Tensor>,
{
    let rec_x = g_a(&g_b(x)?)?;
    let rec_y = g_b(&g_a(y)?)?;
    Ok((l1_mean(&rec_x, x)? + l1_mean(&rec_y, y)?)?)
}

fn mean_sq_to(map: &Tensor, target: f64) -> Result<Tensor> {
    Ok((map - target)?.sqr()?.mean_all()?)
}

fn mean_over_heads(terms: Vec<Tensor>) -> Result<Tensor> {
    let n = terms.len();
    if n == 0 {
        return Err(Error::Argument("no discriminator heads".into()));
    }
    let sum = Tensor::stack(&terms, 0)?.sum_all()?;
    Ok((sum / n as f64)?)
}

/// Discriminator objective with targets real = 1, fake = 0, averaged over heads.
pub fn lsgan_d_loss(real_maps: &[Tensor], fake_maps: &[Tensor]) -> Result<Tensor> {
    if real_maps.len() != fake_maps.len() {
        return Err(Error::Argument(format!(
            "{} real maps vs {} fake maps",
            real_maps.len(),
            fake_maps.len()
        )));
    }
    let terms = real_maps
        .iter()
        .zip(fake_maps)
        .map(|(r, f)| Ok(((mean_sq_to(r, 1.0)? + mean_sq_to(f, 0.0)?)? * 0.5)?))
        .collect::<Result<Vec<_>>>()?;
    mean_over_heads(terms)
}

/// Generator objective: push every head's fake score toward the real target.
pub fn lsgan_g_loss(fake_maps: &[Tensor]) -> Result<Tensor> {
    let terms = fake_maps
        .iter()
        .map(|f| Ok((mean_sq_to(f, 1.0)? * 0.5)?))
        .collect::<Result<Vec<_>>>()?;
    mean_over_heads(terms)
}

pub fn total_loss(weights: &LossWeights, adv: &Tensor, cyc: &Tensor, corr: &Tensor) -> Result<Tensor> {
    weights.validate()?;
    let t = ((adv * weights.lambda_adv)? + (cyc * weights.lambda_cyc)?)?;
    Ok((t + (corr * weights.lambda_corr)?)?)
}
