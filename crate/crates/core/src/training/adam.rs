//! Adam with inspectable, checkpointable moments.

use candle_core::backprop::GradStore;
use candle_core::Tensor;

use crate::error::{Error, Result};
use crate::network::{Checkpoint, ParamSet};

#[derive(Debug, Clone)]
pub struct Adam {
    params: ParamSet,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(params: ParamSet, lr: f64, betas: (f64, f64), eps: f64) -> Result<Self> {
        let zeros = |p: &ParamSet| -> Result<Vec<Tensor>> { p.vars().map(|v| Ok(v.as_tensor().zeros_like()?)).collect() };
        Ok(Self {
            m: zeros(&params)?,
            v: zeros(&params)?,
            params,
            step: 0,
            lr,
            beta1: betas.0,
            beta2: betas.1,
            eps,
        })
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    /// One update; parameters without a gradient see a zero gradient.
    pub fn apply(&mut self, grads: &GradStore) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (i, var) in self.params.vars().enumerate() {
            let g = match grads.get(var.as_tensor()) {
                Some(g) => g.clone(),
                None => var.as_tensor().zeros_like()?,
            };
            let m = ((&self.m[i] * self.beta1)? + (&g * (1.0 - self.beta1))?)?;
            let v = ((&self.v[i] * self.beta2)? + (g.sqr()? * (1.0 - self.beta2))?)?;
            let denom = ((&v / bc2)?.sqrt()? + self.eps)?;
            let delta = ((&m / bc1)? / denom)?;
            var.set(&(var.as_tensor() - (delta * self.lr)?)?)?;
            self.m[i] = m;
            self.v[i] = v;
        }
        Ok(())
    }

    pub fn save(&self, prefix: &str, ckpt: &mut Checkpoint) -> Result<()> {
        for (i, (name, _)) in self.params.iter().enumerate() {
            ckpt.push_tensor(format!("{prefix}.m.{name}"), &self.m[i])?;
            ckpt.push_tensor(format!("{prefix}.v.{name}"), &self.v[i])?;
        }
        Ok(())
    }

    pub fn load(&mut self, prefix: &str, ckpt: &Checkpoint, step: u64) -> Result<()> {
        let names: Vec<String> = self.params.iter().map(|(n, _)| n.to_string()).collect();
        for (i, name) in names.iter().enumerate() {
            let (dtype, device) = (self.m[i].dtype(), self.m[i].device().clone());
            let m = ckpt.tensor(&format!("{prefix}.m.{name}"), dtype, &device)?;
            let v = ckpt.tensor(&format!("{prefix}.v.{name}"), dtype, &device)?;
            if m.dims() != self.m[i].dims() || v.dims() != self.v[i].dims() {
                return Err(Error::Checkpoint(format!("optimizer moment shape mismatch for `{prefix}.{name}`")));
            }
            self.m[i] = m;
            self.v[i] = v;
        }
        self.step = step;
        Ok(())
    }
}
