//! Training state, the per-iteration update, checkpointing and the resumable loop.

use std::collections::VecDeque;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use candle_core::{DType, Device, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::data::{sample_training_pair, sequence_patches, TrainingData};
use super::{StepLog, TrainConfig, LOSS_HISTORY_LEN};
use crate::correspond::CorrespondenceTriplet;
use crate::datagen::{derive_seed, Dataset};
use crate::error::{Error, Result};
use crate::losses::{
    correspondence_loss, l1_mean, lsgan_d_loss, lsgan_g_loss, scalar, total_loss, ExtractorRegistry,
    FeatureExtractor, LossWeights,
};
use crate::network::{Checkpoint, DiscriminatorBank, DiscriminatorConfig, Generator, GeneratorConfig, ParamSet};

pub const METRICS_FILE: &str = "metrics.csv";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
const CHECKPOINT_DIR: &str = "checkpoints";
const STATE_KIND: &str = "train_state";

// seed-derivation streams of the independent random components
const STREAM_G_A: u64 = 1;
const STREAM_G_B: u64 = 2;
const STREAM_D_A: u64 = 3;
const STREAM_D_B: u64 = 4;
const STREAM_SAMPLER: u64 = 5;

pub fn checkpoint_path(out_dir: &Path, iteration: u64) -> PathBuf {
    out_dir.join(CHECKPOINT_DIR).join(format!("iter_{iteration:08}.ckpt"))
}

pub fn final_checkpoint_path(out_dir: &Path) -> PathBuf {
    out_dir.join(FINAL_CHECKPOINT)
}

/// The checkpoint with the highest iteration under `out_dir`, if any.
pub fn latest_checkpoint(out_dir: &Path) -> Result<Option<(u64, PathBuf)>> {
    let mut best: Option<(u64, PathBuf)> = None;
    let dir = out_dir.join(CHECKPOINT_DIR);
    if dir.is_dir() {
        for entry in std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            let iter = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_prefix("iter_")?.strip_suffix(".ckpt")?.parse::<u64>().ok());
            if let Some(i) = iter {
                if best.as_ref().map_or(true, |(b, _)| i > *b) {
                    best = Some((i, path));
                }
            }
        }
    }
    let fin = final_checkpoint_path(out_dir);
    if fin.is_file() {
        let i = StateMeta::read(&Checkpoint::load(&fin)?)?.iteration;
        // ties go to the final checkpoint
        if best.as_ref().map_or(true, |(b, _)| i >= *b) {
            best = Some((i, fin));
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RngState {
    seed: String,
    stream: u64,
    /// u128 does not survive every JSON reader, so it travels as a string.
    word_pos: String,
}

impl RngState {
    fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: hex::encode(rng.get_seed()),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    fn restore(&self) -> Result<ChaCha8Rng> {
        let bad = || Error::Checkpoint("malformed rng state".into());
        let seed: [u8; 32] = hex::decode(&self.seed).map_err(|_| bad())?.try_into().map_err(|_| bad())?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos.parse::<u128>().map_err(|_| bad())?);
        Ok(rng)
    }
}

/// Checkpoint header of a training state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StateMeta {
    kind: String,
    iteration: u64,
    train_config: TrainConfig,
    generator: GeneratorConfig,
    discriminator: DiscriminatorConfig,
    patch_size: usize,
    rng: RngState,
    opt_g_step: u64,
    opt_d_step: u64,
    history: Vec<StepLog>,
}

impl StateMeta {
    fn read(ckpt: &Checkpoint) -> Result<Self> {
        let meta: Self = serde_json::from_value(ckpt.meta.clone())
            .map_err(|e| Error::Checkpoint(format!("not a training checkpoint: {e}")))?;
        if meta.kind != STATE_KIND {
            return Err(Error::Checkpoint(format!("unexpected checkpoint kind `{}`", meta.kind)));
        }
        Ok(meta)
    }
}

/// Builds the domain-B generator (glossy to diffuse) stored in a training checkpoint.
pub struct GeneratorSnapshot;

impl GeneratorSnapshot {
    pub const PREFIX_A: &'static str = "g_a";
    pub const PREFIX_B: &'static str = "g_b";

    pub fn config(ckpt: &Checkpoint) -> Result<GeneratorConfig> {
        Ok(StateMeta::read(ckpt)?.generator)
    }

    /// Glossy-to-diffuse generator with its trained weights.
    pub fn load_b(ckpt: &Checkpoint, dtype: DType, device: &Device) -> Result<Generator> {
        let g = Generator::new(Self::config(ckpt)?, dtype, device)?;
        ckpt.load_params(Self::PREFIX_B, &g.params())?;
        Ok(g)
    }
}

/// Everything needed to continue training exactly where it stopped.
pub struct TrainState {
    pub iteration: u64,
    pub g_a: Generator,
    pub g_b: Generator,
    pub d_a: DiscriminatorBank,
    pub d_b: DiscriminatorBank,
    pub opt_g: Adam,
    pub opt_d: Adam,
    rng: ChaCha8Rng,
    pub history: VecDeque<StepLog>,
}

impl TrainState {
    pub fn generator_params(&self) -> ParamSet {
        let mut p = ParamSet::default();
        p.extend_prefixed("g_a", self.g_a.params());
        p.extend_prefixed("g_b", self.g_b.params());
        p
    }

    pub fn discriminator_params(&self) -> ParamSet {
        let mut p = ParamSet::default();
        p.extend_prefixed("d_a", self.d_a.params());
        p.extend_prefixed("d_b", self.d_b.params());
        p
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }
}

/// One sampled pair moved to tensors.
/// One unpaired draw as tensors: a glossy sequence `X` and a diffuse sequence `Y`, each
/// with the correspondence its patch strip is cut at.
#[derive(Debug, Clone)]
pub struct PairTensors {
    pub glossy: Tensor,
    pub glossy_corr: CorrespondenceTriplet,
    pub diffuse: Tensor,
    pub diffuse_corr: CorrespondenceTriplet,
}

/// Differentiable generator-side terms of one pair, plus the fakes they were computed on.
pub struct GeneratorObjective {
    pub adv: Tensor,
    pub cyc: Tensor,
    pub corr: Tensor,
    pub total: Tensor,
    pub fake_b: Tensor,
    pub strip_b: Tensor,
    pub fake_a: Tensor,
    pub strip_a: Tensor,
}

/// Weighted generator objective on one pair; `g = [G_A, G_B]`, `d = [D_A, D_B]`.
///
/// L_corr is taken on G_B's output only. The diffuse-side strip is cut where the sampled
/// diffuse correspondence lies.
pub fn generator_objective(
    g: [&Generator; 2],
    d: [&DiscriminatorBank; 2],
    f: &dyn FeatureExtractor,
    weights: &LossWeights,
    patch: usize,
    pair: &PairTensors,
) -> Result<GeneratorObjective> {
    let [g_a, g_b] = g;
    let [d_a, d_b] = d;
    let fake_b = g_b.forward(&pair.glossy)?;
    let fake_a = g_a.forward(&pair.diffuse)?;
    let (patches_b, strip_b) = sequence_patches(&fake_b, &pair.glossy_corr, patch)?;
    let (_, strip_a) = sequence_patches(&fake_a, &pair.diffuse_corr, patch)?;
    let adv = (lsgan_g_loss(&d_b.forward(&fake_b, &strip_b)?)? + lsgan_g_loss(&d_a.forward(&fake_a, &strip_a)?)?)?;
    let cyc = (l1_mean(&g_a.forward(&fake_b)?, &pair.glossy)? + l1_mean(&g_b.forward(&fake_a)?, &pair.diffuse)?)?;
    let corr = correspondence_loss(f, [&patches_b[0], &patches_b[1], &patches_b[2]])?;
    let total = total_loss(weights, &adv, &cyc, &corr)?;
    Ok(GeneratorObjective {
        adv,
        cyc,
        corr,
        total,
        fake_b,
        strip_b,
        fake_a,
        strip_a,
    })
}

/// Detached generator outputs handed to the discriminator update.
struct Fakes {
    fake_b: Tensor,
    strip_b: Tensor,
    fake_a: Tensor,
    strip_a: Tensor,
}

/// Generator-side loss values of one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorLosses {
    pub g_adv: f64,
    pub cyc: f64,
    pub corr: f64,
    pub total: f64,
}

/// Immutable training context: data, configuration and the frozen feature extractor.
pub struct Trainer {
    config: TrainConfig,
    data: TrainingData,
    sequences: Vec<(Tensor, Tensor)>,
    patch: usize,
    extractor: Arc<dyn FeatureExtractor>,
    generator: GeneratorConfig,
    discriminator: DiscriminatorConfig,
    dtype: DType,
    device: Device,
}

impl Trainer {
    pub fn new(data: TrainingData, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let (dtype, device) = (DType::F32, Device::Cpu);
        let (h, w) = data.samples[0].glossy[0].shape();
        let patch = config.patch_size.unwrap_or(data.patch_size);
        if patch > h.min(w) {
            return Err(Error::Config(format!("patch_size {patch} exceeds the {w}x{h} views")));
        }
        for s in &data.samples {
            if s.glossy.iter().chain(&s.diffuse).any(|v| v.shape() != (h, w)) {
                return Err(Error::Dataset(format!("scene {} has views of differing size", s.scene_id)));
            }
        }
        let generator = GeneratorConfig::for_resolution(h, w, config.generator_channels)?;
        let discriminator = DiscriminatorConfig {
            base_channels: config.discriminator_channels,
            max_channels: 8 * config.discriminator_channels,
            layers: config.discriminator_layers,
        };
        discriminator.validate()?;
        DiscriminatorBank::new(discriminator.clone(), dtype, &device)?.check_sizes((h, 3 * w), (patch, 3 * patch))?;
        let extractor = ExtractorRegistry::default().build(&config.extractor, dtype, &device)?;
        let sequences = data
            .samples
            .iter()
            .map(|s| Ok((s.glossy_sequence(dtype, &device)?, s.diffuse_sequence(dtype, &device)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            data,
            sequences,
            patch,
            extractor,
            generator,
            discriminator,
            dtype,
            device,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn data(&self) -> &TrainingData {
        &self.data
    }

    pub fn patch_size(&self) -> usize {
        self.patch
    }

    pub fn generator_config(&self) -> &GeneratorConfig {
        &self.generator
    }

    pub fn extractor(&self) -> &dyn FeatureExtractor {
        self.extractor.as_ref()
    }

    /// Freshly initialized networks, zeroed moments and the seeded sampler.
    pub fn init_state(&self) -> Result<TrainState> {
        let seed = self.config.seed;
        let g_a = Generator::seeded(self.generator.clone(), derive_seed(seed, &[STREAM_G_A]), self.dtype, &self.device)?;
        let g_b = Generator::seeded(self.generator.clone(), derive_seed(seed, &[STREAM_G_B]), self.dtype, &self.device)?;
        let d_a = DiscriminatorBank::seeded(
            self.discriminator.clone(),
            derive_seed(seed, &[STREAM_D_A]),
            self.dtype,
            &self.device,
        )?;
        let d_b = DiscriminatorBank::seeded(
            self.discriminator.clone(),
            derive_seed(seed, &[STREAM_D_B]),
            self.dtype,
            &self.device,
        )?;
        let mut state = TrainState {
            iteration: 0,
            g_a,
            g_b,
            d_a,
            d_b,
            opt_g: Adam::new(ParamSet::default(), 1.0, (0.0, 0.0), 1.0)?,
            opt_d: Adam::new(ParamSet::default(), 1.0, (0.0, 0.0), 1.0)?,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, &[STREAM_SAMPLER])),
            history: VecDeque::new(),
        };
        let c = &self.config;
        state.opt_g = Adam::new(state.generator_params(), c.learning_rate, c.adam_betas, c.adam_eps)?;
        state.opt_d = Adam::new(state.discriminator_params(), c.learning_rate, c.adam_betas, c.adam_eps)?;
        Ok(state)
    }

    fn prepare(&self, state: &mut TrainState) -> Result<Vec<PairTensors>> {
        (0..self.config.batch_size)
            .map(|_| {
                let pair = sample_training_pair(&self.data, &mut state.rng)?;
                Ok(PairTensors {
                    glossy: self.sequences[pair.glossy].0.clone(),
                    glossy_corr: pair.glossy_corr,
                    diffuse: self.sequences[pair.diffuse].1.clone(),
                    diffuse_corr: pair.diffuse_corr,
                })
            })
            .collect()
    }

    /// Draws the iteration's pairs, then updates generators and discriminators in that order.
    pub fn step(&self, state: &mut TrainState) -> Result<StepLog> {
        let pairs = self.prepare(state)?;
        let iteration = state.iteration + 1;
        let (g, fakes) = self.generator_update(state, &pairs, iteration)?;
        let (d_a, d_b) = self.discriminator_update(state, &pairs, &fakes, iteration)?;
        let log = StepLog {
            iteration,
            g_adv: g.g_adv,
            d_a,
            d_b,
            cyc: g.cyc,
            corr: g.corr,
            total: g.total,
        };
        log.check_finite()?;
        state.iteration = iteration;
        if state.history.len() == LOSS_HISTORY_LEN {
            state.history.pop_front();
        }
        state.history.push_back(log);
        Ok(log)
    }

    fn mean(&self, terms: Vec<Tensor>) -> Result<Tensor> {
        let n = terms.len() as f64;
        Ok((Tensor::stack(&terms, 0)?.sum_all()? / n)?)
    }

    /// Minimizes the weighted generator objective; only generator parameters move.
    fn generator_update(
        &self,
        state: &mut TrainState,
        pairs: &[PairTensors],
        iteration: u64,
    ) -> Result<(GeneratorLosses, Vec<Fakes>)> {
        let (mut adv_terms, mut cyc_terms, mut corr_terms, mut totals) = (vec![], vec![], vec![], vec![]);
        let mut fakes = Vec::with_capacity(pairs.len());
        for p in pairs {
            let o = generator_objective(
                [&state.g_a, &state.g_b],
                [&state.d_a, &state.d_b],
                self.extractor(),
                &self.config.weights,
                self.patch,
                p,
            )?;
            totals.push(o.total);
            adv_terms.push(o.adv);
            cyc_terms.push(o.cyc);
            corr_terms.push(o.corr);
            fakes.push(Fakes {
                fake_b: o.fake_b.detach(),
                strip_b: o.strip_b.detach(),
                fake_a: o.fake_a.detach(),
                strip_a: o.strip_a.detach(),
            });
        }
        let total = self.mean(totals)?;
        let losses = GeneratorLosses {
            g_adv: scalar(&self.mean(adv_terms)?)?,
            cyc: scalar(&self.mean(cyc_terms)?)?,
            corr: scalar(&self.mean(corr_terms)?)?,
            total: scalar(&total)?,
        };
        for (name, v) in [("g_adv", losses.g_adv), ("cyc", losses.cyc), ("corr", losses.corr), ("total", losses.total)] {
            if !v.is_finite() {
                log::error!("non-finite generator loss at iteration {iteration}: {losses:?}");
                return Err(Error::NonFinite {
                    component: name.into(),
                    iteration,
                });
            }
        }
        let grads = total.backward()?;
        state.opt_g.apply(&grads)?;
        Ok((losses, fakes))
    }

    /// Both banks separate real sequences and strips from the detached fakes.
    fn discriminator_update(
        &self,
        state: &mut TrainState,
        pairs: &[PairTensors],
        fakes: &[Fakes],
        iteration: u64,
    ) -> Result<(f64, f64)> {
        let (mut a_terms, mut b_terms) = (vec![], vec![]);
        for (p, f) in pairs.iter().zip(fakes) {
            let (_, real_strip_a) = sequence_patches(&p.glossy, &p.glossy_corr, self.patch)?;
            let (_, real_strip_b) = sequence_patches(&p.diffuse, &p.diffuse_corr, self.patch)?;
            b_terms.push(lsgan_d_loss(
                &state.d_b.forward(&p.diffuse, &real_strip_b)?,
                &state.d_b.forward(&f.fake_b, &f.strip_b)?,
            )?);
            a_terms.push(lsgan_d_loss(
                &state.d_a.forward(&p.glossy, &real_strip_a)?,
                &state.d_a.forward(&f.fake_a, &f.strip_a)?,
            )?);
        }
        let (d_a, d_b) = (self.mean(a_terms)?, self.mean(b_terms)?);
        let (va, vb) = (scalar(&d_a)?, scalar(&d_b)?);
        for (name, v) in [("d_A", va), ("d_B", vb)] {
            if !v.is_finite() {
                log::error!("non-finite discriminator loss at iteration {iteration}: d_A={va} d_B={vb}");
                return Err(Error::NonFinite {
                    component: name.into(),
                    iteration,
                });
            }
        }
        let grads = (d_a + d_b)?.backward()?;
        state.opt_d.apply(&grads)?;
        Ok((va, vb))
    }

    /// Runs only the generator half of an iteration on freshly drawn pairs.
    pub fn generator_substep(&self, state: &mut TrainState) -> Result<GeneratorLosses> {
        let pairs = self.prepare(state)?;
        Ok(self.generator_update(state, &pairs, state.iteration + 1)?.0)
    }

    /// Runs a generator forward to obtain fakes, then only the discriminator update.
    pub fn discriminator_substep(&self, state: &mut TrainState) -> Result<(f64, f64)> {
        let pairs = self.prepare(state)?;
        let fakes = pairs
            .iter()
            .map(|p| {
                let fake_b = state.g_b.forward(&p.glossy)?.detach();
                let fake_a = state.g_a.forward(&p.diffuse)?.detach();
                let (_, strip_b) = sequence_patches(&fake_b, &p.glossy_corr, self.patch)?;
                let (_, strip_a) = sequence_patches(&fake_a, &p.diffuse_corr, self.patch)?;
                Ok(Fakes {
                    fake_b,
                    strip_b,
                    fake_a,
                    strip_a,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.discriminator_update(state, &pairs, &fakes, state.iteration + 1)
    }

    pub fn to_checkpoint(&self, state: &TrainState) -> Result<Checkpoint> {
        let meta = StateMeta {
            kind: STATE_KIND.into(),
            iteration: state.iteration,
            train_config: self.config.clone(),
            generator: self.generator.clone(),
            discriminator: self.discriminator.clone(),
            patch_size: self.patch,
            rng: RngState::capture(&state.rng),
            opt_g_step: state.opt_g.step,
            opt_d_step: state.opt_d.step,
            history: state.history.iter().copied().collect(),
        };
        let mut ckpt = Checkpoint::new(serde_json::to_value(&meta)?);
        ckpt.push_params(GeneratorSnapshot::PREFIX_A, &state.g_a.params())?;
        ckpt.push_params(GeneratorSnapshot::PREFIX_B, &state.g_b.params())?;
        ckpt.push_params("d_a", &state.d_a.params())?;
        ckpt.push_params("d_b", &state.d_b.params())?;
        state.opt_g.save("opt_g", &mut ckpt)?;
        state.opt_d.save("opt_d", &mut ckpt)?;
        Ok(ckpt)
    }

    /// Rebuilds a state; the stored configuration must match this trainer's except for
    /// the run length and checkpoint cadence.
    pub fn from_checkpoint(&self, ckpt: &Checkpoint) -> Result<TrainState> {
        let meta = StateMeta::read(ckpt)?;
        let comparable = |c: &TrainConfig| TrainConfig {
            max_iterations: 0,
            checkpoint_every: 0,
            ..c.clone()
        };
        if comparable(&meta.train_config) != comparable(&self.config)
            || meta.generator != self.generator
            || meta.discriminator != self.discriminator
            || meta.patch_size != self.patch
        {
            return Err(Error::Config(
                "checkpoint was written with a different training configuration".into(),
            ));
        }
        let mut state = self.init_state()?;
        ckpt.load_params(GeneratorSnapshot::PREFIX_A, &state.g_a.params())?;
        ckpt.load_params(GeneratorSnapshot::PREFIX_B, &state.g_b.params())?;
        ckpt.load_params("d_a", &state.d_a.params())?;
        ckpt.load_params("d_b", &state.d_b.params())?;
        state.opt_g.load("opt_g", ckpt, meta.opt_g_step)?;
        state.opt_d.load("opt_d", ckpt, meta.opt_d_step)?;
        state.rng = meta.rng.restore()?;
        state.iteration = meta.iteration;
        state.history = meta.history.into_iter().collect();
        Ok(state)
    }

    pub fn save_state(&self, state: &TrainState, path: &Path) -> Result<()> {
        self.to_checkpoint(state)?.save(path)
    }

    pub fn load_state(&self, path: &Path) -> Result<TrainState> {
        self.from_checkpoint(&Checkpoint::load(path)?)
    }

    /// Trains to `max_iterations`, resuming from the newest checkpoint in `out_dir`.
    ///
    /// Writes `metrics.csv`, periodic checkpoints and `final.ckpt`.
    pub fn run(&self, out_dir: &Path) -> Result<TrainState> {
        let ckpt_dir = out_dir.join(CHECKPOINT_DIR);
        std::fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
        let mut state = match latest_checkpoint(out_dir)? {
            Some((_, path)) => {
                let s = self.load_state(&path)?;
                log::info!("resuming from {} at iteration {}", path.display(), s.iteration);
                s
            }
            None => self.init_state()?,
        };
        let metrics_path = out_dir.join(METRICS_FILE);
        let mut metrics = open_metrics(&metrics_path, state.iteration)?;
        let max = self.config.max_iterations;
        while state.iteration < max {
            let log = self.step(&mut state)?;
            writeln!(metrics, "{}", log.csv_row()).map_err(|e| Error::io(&metrics_path, e))?;
            if log.iteration % 100 == 0 || log.iteration == max {
                log::info!(
                    "iter {} g_adv {:.4} d_A {:.4} d_B {:.4} cyc {:.4} corr {:.4} total {:.4}",
                    log.iteration,
                    log.g_adv,
                    log.d_a,
                    log.d_b,
                    log.cyc,
                    log.corr,
                    log.total
                );
            }
            let every = self.config.checkpoint_every;
            if every > 0 && log.iteration % every == 0 {
                metrics.flush().map_err(|e| Error::io(&metrics_path, e))?;
                self.save_state(&state, &checkpoint_path(out_dir, log.iteration))?;
            }
        }
        metrics.flush().map_err(|e| Error::io(&metrics_path, e))?;
        self.save_state(&state, &final_checkpoint_path(out_dir))?;
        Ok(state)
    }
}

/// Opens the metrics file for appending, keeping only rows up to `iteration`.
fn open_metrics(path: &Path, iteration: u64) -> Result<std::io::BufWriter<std::fs::File>> {
    let mut kept = vec![StepLog::CSV_HEADER.to_string()];
    if iteration > 0 && path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for line in text.lines().skip(1) {
            let it = line.split(',').next().and_then(|s| s.parse::<u64>().ok());
            if matches!(it, Some(i) if i <= iteration) {
                kept.push(line.to_string());
            }
        }
    }
    let mut body = kept.join("\n");
    body.push('\n');
    std::fs::write(path, body).map_err(|e| Error::io(path, e))?;
    let file = std::fs::OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    Ok(std::io::BufWriter::new(file))
}

/// Loads the dataset's triplets for the configured correspondence source and trains.
pub fn train(dataset: &Dataset, config: &TrainConfig, out_dir: &Path) -> Result<TrainState> {
    let data = TrainingData::load(dataset, config.corr_source)?;
    Trainer::new(data, config.clone())?.run(out_dir)
}
