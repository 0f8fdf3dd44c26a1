//! In-memory training triplets and the unpaired sampler.

use candle_core::{DType, Device, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::correspond::{patch_origin, CorrSource, CorrespondenceTriplet};
use crate::datagen::{Dataset, ShadingMode};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::network::{concat_view_tensors, concat_views, split_view_tensors};

/// One view triplet of one scene in both domains, with its correspondence list.
#[derive(Debug, Clone)]
pub struct TripletSample {
    pub scene_id: u64,
    pub triplet: usize,
    pub glossy: [ImageTensor; 3],
    pub diffuse: [ImageTensor; 3],
    pub corrs: Vec<CorrespondenceTriplet>,
}

impl TripletSample {
    pub fn glossy_sequence(&self, dtype: DType, device: &Device) -> Result<Tensor> {
        concat_views(&self.glossy)?.to_tensor(dtype, device)
    }

    pub fn diffuse_sequence(&self, dtype: DType, device: &Device) -> Result<Tensor> {
        concat_views(&self.diffuse)?.to_tensor(dtype, device)
    }
}

/// Every usable triplet of a dataset, decoded once.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub samples: Vec<TripletSample>,
    pub patch_size: usize,
}

impl TrainingData {
    pub fn new(samples: Vec<TripletSample>, patch_size: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Dataset("no usable triplets".into()));
        }
        if let Some(s) = samples.iter().find(|s| s.corrs.is_empty()) {
            return Err(Error::Dataset(format!(
                "scene {} triplet {} has no correspondences",
                s.scene_id, s.triplet
            )));
        }
        Ok(Self { samples, patch_size })
    }

    /// Loads the triplets listed for `source` in the manifest.
    pub fn load(dataset: &Dataset, source: CorrSource) -> Result<Self> {
        let mut samples = Vec::new();
        for entry in dataset.manifest.triplets_for(source) {
            let views = entry.views();
            let load = |mode| -> Result<[ImageTensor; 3]> {
                Ok([
                    dataset.load_view(entry.scene_id, mode, views[0])?,
                    dataset.load_view(entry.scene_id, mode, views[1])?,
                    dataset.load_view(entry.scene_id, mode, views[2])?,
                ])
            };
            samples.push(TripletSample {
                scene_id: entry.scene_id,
                triplet: entry.triplet,
                glossy: load(ShadingMode::Glossy)?,
                diffuse: load(ShadingMode::Diffuse)?,
                corrs: dataset.load_correspondences(entry.scene_id, entry.triplet, source)?,
            });
        }
        if samples.is_empty() {
            return Err(Error::Dataset(format!(
                "manifest in {} lists no triplets with `{}` correspondences",
                dataset.root.display(),
                source.as_str()
            )));
        }
        Self::new(samples, dataset.patch_size())
    }
}

/// Uniform pick from a non-empty correspondence list.
pub fn sample_correspondence<'a>(
    corrs: &'a [CorrespondenceTriplet],
    rng: &mut ChaCha8Rng,
) -> Result<&'a CorrespondenceTriplet> {
    if corrs.is_empty() {
        return Err(Error::Dataset("empty correspondence list".into()));
    }
    Ok(&corrs[rng.gen_range(0..corrs.len())])
}

/// Indices of an unpaired draw: a glossy triplet with one of its correspondences and an
/// independently drawn diffuse triplet with one of its own.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingPair {
    pub glossy: usize,
    pub glossy_corr: CorrespondenceTriplet,
    pub diffuse: usize,
    pub diffuse_corr: CorrespondenceTriplet,
}

pub fn sample_training_pair(data: &TrainingData, rng: &mut ChaCha8Rng) -> Result<TrainingPair> {
    let n = data.samples.len();
    if n == 0 {
        return Err(Error::Dataset("empty manifest".into()));
    }
    let glossy = rng.gen_range(0..n);
    let glossy_corr = *sample_correspondence(&data.samples[glossy].corrs, rng)?;
    let diffuse = rng.gen_range(0..n);
    let diffuse_corr = *sample_correspondence(&data.samples[diffuse].corrs, rng)?;
    Ok(TrainingPair {
        glossy,
        glossy_corr,
        diffuse,
        diffuse_corr,
    })
}

/// Patches of a `(1, 3, H, 3W)` sequence at `corr`, cut from the split views so no
/// patch straddles a view seam; returns the three patches and their width-wise strip.
pub fn sequence_patches(seq: &Tensor, corr: &CorrespondenceTriplet, patch: usize) -> Result<([Tensor; 3], Tensor)> {
    let views = split_view_tensors(seq)?;
    let (_, _, h, w) = views[0].dims4()?;
    let pts = corr.points();
    let mut out = Vec::with_capacity(3);
    for (view, p) in views.iter().zip(pts) {
        let (x0, y0) = patch_origin(p, w, h, patch).ok_or(Error::BorderViolation {
            x: p[0] as f32,
            y: p[1] as f32,
            size: patch,
        })?;
        out.push(view.narrow(2, y0, patch)?.narrow(3, x0, patch)?.contiguous()?);
    }
    let strip = concat_view_tensors(&out)?;
    let [a, b, c]: [Tensor; 3] = out.try_into().expect("three patches");
    Ok(([a, b, c], strip))
}
