//! Image error against paired diffuse renderings and inter-view consistency.

use std::path::Path;

use candle_core::{DType, Device, Tensor};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correspond::{extract_patches, CorrSource, CorrespondenceTriplet};
use crate::datagen::{view_path, Dataset, ShadingMode};
use crate::error::{Error, Result};
use crate::image::{to_u8, ImageTensor};
use crate::inference::{load_translator, translate_sequence};
use crate::losses::{correspondence_loss, scalar, ExtractorRegistry, FeatureExtractor};
use crate::network::{checkpoint_id, concat_views, split_views, Generator};

pub const REPORT_VERSION: u32 = 1;
/// Correspondences per batched extractor call.
const CONSISTENCY_CHUNK: usize = 32;

/// Mean squared error on the 8-bit scale, over pixels and channels.
pub fn image_mse(pred: &ImageTensor, gt: &ImageTensor) -> Result<f64> {
    if pred.shape() != gt.shape() {
        return Err(Error::Argument(format!(
            "image_mse: shapes {:?} and {:?} differ",
            pred.shape(),
            gt.shape()
        )));
    }
    let sum: f64 = pred
        .data()
        .iter()
        .zip(gt.data())
        .map(|(&a, &b)| (to_u8(a) as f64 - to_u8(b) as f64).powi(2))
        .sum();
    Ok(sum / pred.data().len() as f64)
}

/// Mean over correspondences of the correspondence loss on patches cut from `views`.
pub fn interview_consistency(
    views: [&ImageTensor; 3],
    corrs: &[CorrespondenceTriplet],
    f: &dyn FeatureExtractor,
    patch: usize,
) -> Result<f64> {
    if corrs.is_empty() {
        return Err(Error::Metric("inter-view consistency needs at least one correspondence".into()));
    }
    let mut weighted = 0.0;
    for chunk in corrs.chunks(CONSISTENCY_CHUNK) {
        let mut stacks: [Vec<Tensor>; 3] = Default::default();
        for c in chunk {
            let patches = extract_patches(views, c, patch)?;
            for (s, p) in stacks.iter_mut().zip(&patches) {
                s.push(p.to_tensor(DType::F32, &Device::Cpu)?);
            }
        }
        let [a, b, c] = stacks.map(|s| Tensor::cat(&s, 0));
        // every layer term is an element mean, so a batch yields the mean over its members
        let loss = correspondence_loss(f, [&a?, &b?, &c?])?;
        weighted += scalar(&loss)? * chunk.len() as f64;
    }
    Ok(weighted / corrs.len() as f64)
}

/// Translates one triplet as a single generator window.
pub fn translate_triplet(g: &Generator, views: &[ImageTensor; 3]) -> Result<[ImageTensor; 3]> {
    translate_window(|x| g.forward(x), views)
}

fn translate_window<F>(net: F, views: &[ImageTensor; 3]) -> Result<[ImageTensor; 3]>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    let seq = concat_views(views)?.to_tensor(DType::F32, &Device::Cpu)?;
    split_views(&ImageTensor::from_tensor(&net(&seq)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateOptions {
    /// Defaults to ground truth when the manifest lists any, else feature matches.
    pub corr_source: Option<CorrSource>,
    pub extractor: String,
    /// Defaults to the dataset's patch size.
    pub patch_size: Option<usize>,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        Self {
            corr_source: None,
            extractor: "pyramid".into(),
            patch_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneReport {
    pub scene_id: u64,
    pub views: usize,
    pub paired: bool,
    /// Untranslated glossy input against the diffuse rendering.
    pub glossy_mse: Option<f64>,
    pub model_mse: Option<f64>,
    pub triplets: usize,
    pub consistency_model: Option<f64>,
    /// The same score on the ground-truth diffuse triplets.
    pub consistency_diffuse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub glossy_mse: Option<f64>,
    pub model_mse: Option<f64>,
    pub consistency_model: Option<f64>,
    pub consistency_diffuse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub version: u32,
    pub checkpoint_id: Option<String>,
    pub dataset_config_hash: String,
    pub mse_scale: String,
    pub mse_available: bool,
    pub corr_source: CorrSource,
    pub extractor: String,
    pub patch_size: usize,
    pub scenes: Vec<SceneReport>,
    pub aggregate: AggregateReport,
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn evaluate_scene<F>(
    dataset: &Dataset,
    net: &F,
    scene_id: u64,
    source: CorrSource,
    f: &dyn FeatureExtractor,
    patch: usize,
) -> Result<SceneReport>
where
    F: Fn(&Tensor) -> Result<Tensor> + Sync,
{
    let glossy = dataset.load_views(scene_id, ShadingMode::Glossy)?;
    let n = glossy.len();
    let paired = (0..n).all(|v| view_path(&dataset.root, scene_id, ShadingMode::Diffuse, v).is_file());
    let diffuse = if paired {
        Some(dataset.load_views(scene_id, ShadingMode::Diffuse)?)
    } else {
        None
    };
    let translated = translate_sequence(net, &glossy)?;
    let (glossy_mse, model_mse) = match &diffuse {
        Some(d) => {
            let per = |imgs: &[ImageTensor]| -> Result<f64> {
                let s = imgs.iter().zip(d).map(|(a, b)| image_mse(a, b)).sum::<Result<f64>>()?;
                Ok(s / n as f64)
            };
            (Some(per(&glossy)?), Some(per(&translated)?))
        }
        None => (None, None),
    };
    let (mut model, mut base) = (Vec::new(), Vec::new());
    for entry in dataset.manifest.triplets_for(source).into_iter().filter(|t| t.scene_id == scene_id) {
        let corrs = dataset.load_correspondences(scene_id, entry.triplet, source)?;
        if corrs.is_empty() {
            continue;
        }
        let [a, b, c] = entry.views();
        let out = translate_window(net, &[glossy[a].clone(), glossy[b].clone(), glossy[c].clone()])?;
        model.push(interview_consistency([&out[0], &out[1], &out[2]], &corrs, f, patch)?);
        if let Some(d) = &diffuse {
            base.push(interview_consistency([&d[a], &d[b], &d[c]], &corrs, f, patch)?);
        }
    }
    let avg = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    Ok(SceneReport {
        scene_id,
        views: n,
        paired,
        glossy_mse,
        model_mse,
        triplets: model.len(),
        consistency_model: avg(&model),
        consistency_diffuse: avg(&base),
    })
}

pub fn evaluate_generator(dataset: &Dataset, g: &Generator, opts: &EvaluateOptions) -> Result<EvaluationReport> {
    evaluate_with(dataset, |x: &Tensor| g.forward(x), opts)
}

/// Scores a sequence-to-sequence map on every scene of `dataset`; scenes are evaluated
/// in parallel and reported in manifest order.
pub fn evaluate_with<F>(dataset: &Dataset, net: F, opts: &EvaluateOptions) -> Result<EvaluationReport>
where
    F: Fn(&Tensor) -> Result<Tensor> + Sync,
{
    let source = opts.corr_source.unwrap_or_else(|| {
        if !dataset.manifest.triplets_for(CorrSource::Gt).is_empty() {
            CorrSource::Gt
        } else {
            CorrSource::Feat
        }
    });
    let patch = opts.patch_size.unwrap_or_else(|| dataset.patch_size());
    let f = ExtractorRegistry::default().build(&opts.extractor, DType::F32, &Device::Cpu)?;
    let scenes = dataset
        .manifest
        .scenes
        .par_iter()
        .map(|s| evaluate_scene(dataset, &net, s.scene_id, source, f.as_ref(), patch))
        .collect::<Result<Vec<_>>>()?;
    let mse_available = !scenes.is_empty() && scenes.iter().all(|s| s.paired);
    if !mse_available {
        log::warn!("dataset is not fully paired; image MSE is unavailable");
    }
    let aggregate = AggregateReport {
        glossy_mse: if mse_available { mean_of(scenes.iter().map(|s| s.glossy_mse)) } else { None },
        model_mse: if mse_available { mean_of(scenes.iter().map(|s| s.model_mse)) } else { None },
        consistency_model: mean_of(scenes.iter().map(|s| s.consistency_model)),
        consistency_diffuse: mean_of(scenes.iter().map(|s| s.consistency_diffuse)),
    };
    Ok(EvaluationReport {
        version: REPORT_VERSION,
        checkpoint_id: None,
        dataset_config_hash: dataset.manifest.config_hash.clone(),
        mse_scale: "8-bit".into(),
        mse_available,
        corr_source: source,
        extractor: opts.extractor.clone(),
        patch_size: patch,
        scenes,
        aggregate,
    })
}

/// Evaluates the glossy-to-diffuse generator stored in `checkpoint`.
pub fn evaluate(dataset: &Dataset, checkpoint: &Path, opts: &EvaluateOptions) -> Result<EvaluationReport> {
    let g = load_translator(checkpoint)?;
    let mut report = evaluate_generator(dataset, &g, opts)?;
    report.checkpoint_id = Some(checkpoint_id(checkpoint)?);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::PyramidExtractor;

    fn img(seed: usize) -> ImageTensor {
        ImageTensor::from_fn(16, 16, move |x, y| {
            let v = ((x * 7 + y * 13 + seed * 31) % 17) as f32 / 8.5 - 1.0;
            [v, -v * 0.5, (v * 3.0).sin()]
        })
    }

    #[test]
    fn mse_constant_offset() {
        let a = ImageTensor::filled(4, 4, [-1.0; 3]);
        let b = ImageTensor::filled(4, 4, [-1.0 + 10.0 / 127.5; 3]);
        assert_eq!(image_mse(&a, &b).unwrap(), 100.0);
        assert_eq!(image_mse(&a, &a).unwrap(), 0.0);
        assert!(matches!(image_mse(&a, &ImageTensor::filled(4, 5, [0.0; 3])), Err(Error::Argument(_))));
    }

    #[test]
    fn consistency_of_identical_views_is_zero() {
        let f = PyramidExtractor::standard(DType::F32, &Device::Cpu).unwrap();
        let v = img(1);
        let corrs: Vec<_> = (4..12)
            .map(|i| {
                let p = [i as f64, 8.0];
                CorrespondenceTriplet { p1: p, p2: p, p3: p, score: 0.0 }
            })
            .collect();
        assert_eq!(interview_consistency([&v, &v, &v], &corrs, &f, 8).unwrap(), 0.0);
        assert!(matches!(interview_consistency([&v, &v, &v], &[], &f, 8), Err(Error::Metric(_))));
    }

    #[test]
    fn chunked_batches_match_per_correspondence_mean() {
        let f = PyramidExtractor::standard(DType::F32, &Device::Cpu).unwrap();
        let (a, b, c) = (img(1), img(2), img(3));
        let corrs: Vec<_> = (0..40)
            .map(|i| CorrespondenceTriplet {
                p1: [4.0 + (i % 9) as f64, 4.0 + (i % 7) as f64],
                p2: [5.0 + (i % 5) as f64, 8.0],
                p3: [8.0, 4.0 + (i % 8) as f64],
                score: 0.0,
            })
            .collect();
        let batched = interview_consistency([&a, &b, &c], &corrs, &f, 8).unwrap();
        let single: f64 = corrs
            .iter()
            .map(|k| interview_consistency([&a, &b, &c], std::slice::from_ref(k), &f, 8).unwrap())
            .sum::<f64>()
            / corrs.len() as f64;
        assert!((batched - single).abs() <= 1e-5 * single.max(1.0), "{batched} vs {single}");
    }
}
