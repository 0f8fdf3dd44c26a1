//! The dual generator / dual discriminator optimization loop.
//!
//! Domain A is glossy, domain B diffuse. `G_B` maps A to B, `G_A` maps B to A,
//! and each discriminator bank judges the domain it is named after.

mod adam;
mod data;
mod state;

use serde::{Deserialize, Serialize};

use crate::correspond::CorrSource;
use crate::error::{Error, Result};
use crate::losses::LossWeights;

pub use adam::Adam;
pub use data::{
    sample_correspondence, sample_training_pair, sequence_patches, TrainingData, TrainingPair, TripletSample,
};
pub use state::{
    checkpoint_path, final_checkpoint_path, generator_objective, latest_checkpoint, train, GeneratorLosses,
    GeneratorObjective, GeneratorSnapshot, PairTensors, TrainState, Trainer, FINAL_CHECKPOINT, METRICS_FILE,
};

/// Entries kept in the in-state loss history.
pub const LOSS_HISTORY_LEN: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub weights: LossWeights,
    pub learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub batch_size: usize,
    pub max_iterations: u64,
    /// 0 disables periodic checkpoints; the final one is always written.
    pub checkpoint_every: u64,
    /// Defaults to the dataset's patch size.
    pub patch_size: Option<usize>,
    pub seed: u64,
    pub corr_source: CorrSource,
    pub generator_channels: usize,
    pub discriminator_channels: usize,
    pub discriminator_layers: usize,
    pub extractor: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            learning_rate: 2e-4,
            adam_betas: (0.5, 0.999),
            adam_eps: 1e-8,
            batch_size: 1,
            max_iterations: 2000,
            checkpoint_every: 500,
            patch_size: None,
            seed: 0,
            corr_source: CorrSource::Gt,
            generator_channels: 8,
            discriminator_channels: 8,
            discriminator_layers: 3,
            extractor: "pyramid".into(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        let (b1, b2) = self.adam_betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return Err(Error::Config(format!("adam betas must lie in [0, 1), got ({b1}, {b2})")));
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::Config("adam_eps must be positive".into()));
        }
        if self.patch_size == Some(0) {
            return Err(Error::Config("patch_size must be positive".into()));
        }
        if self.generator_channels == 0 || self.discriminator_channels == 0 || self.discriminator_layers == 0 {
            return Err(Error::Config("channel counts and discriminator_layers must be positive".into()));
        }
        Ok(())
    }
}

/// Loss components of one iteration, batch-averaged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub iteration: u64,
    /// Generator adversarial term summed over both directions.
    pub g_adv: f64,
    pub d_a: f64,
    pub d_b: f64,
    pub cyc: f64,
    pub corr: f64,
    /// Weighted generator objective.
    pub total: f64,
}

impl StepLog {
    pub const CSV_HEADER: &'static str = "iteration,g_adv,d_A,d_B,cyc,corr,total";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.iteration, self.g_adv, self.d_a, self.d_b, self.cyc, self.corr, self.total
        )
    }

    pub fn components(&self) -> [(&'static str, f64); 6] {
        [
            ("g_adv", self.g_adv),
            ("d_A", self.d_a),
            ("d_B", self.d_b),
            ("cyc", self.cyc),
            ("corr", self.corr),
            ("total", self.total),
        ]
    }

    /// Rejects the first non-finite component, logging the whole record.
    pub fn check_finite(&self) -> Result<()> {
        if let Some((name, _)) = self.components().iter().find(|(_, v)| !v.is_finite()) {
            log::error!("non-finite loss at iteration {}: {:?}", self.iteration, self);
            return Err(Error::NonFinite {
                component: (*name).to_string(),
                iteration: self.iteration,
            });
        }
        Ok(())
    }
}
