//! Rendering whole datasets to disk and reading them back.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::camera::{sample_camera_arc, CameraPose};
use super::groundtruth::{ground_truth_correspondences, GroundTruthParams};
use super::render::{render_with_coverage, ShadingMode};
use super::scene::{sample_scene_with_id, DatagenConfig, SceneSpec};
use super::derive_seed;
use crate::correspond::{read_records, write_records, CorrRecord, CorrSource, CorrespondenceTriplet};
use crate::error::{Error, Result};
use crate::image::ImageTensor;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";
const MANIFEST_VERSION: u32 = 1;

/// Number of overlapping view triplets in an arc of `n_views`.
pub fn triplets_per_scene(n_views: usize) -> usize {
    n_views.saturating_sub(2)
}

/// One scene fully rendered in both shading modes.
#[derive(Debug, Clone)]
pub struct RenderedScenePacket {
    pub scene: SceneSpec,
    pub cameras: Vec<CameraPose>,
    pub glossy_views: Vec<ImageTensor>,
    pub diffuse_views: Vec<ImageTensor>,
    /// Indexed by triplet `t`, covering views `t, t+1, t+2`.
    pub gt_correspondences: Vec<Vec<CorrespondenceTriplet>>,
}

/// Per-scene metadata stored next to the images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMeta {
    pub scene: SceneSpec,
    pub cameras: Vec<CameraPose>,
}

pub fn render_scene_packet(config: &DatagenConfig, scene_id: u64) -> Result<RenderedScenePacket> {
    let master = config.seed;
    let scene = sample_scene_with_id(scene_id, derive_seed(master, &[scene_id, 0]), config)?;
    let cameras = sample_camera_arc(derive_seed(master, &[scene_id, 1]), config.n_views, &config.camera)?;
    let res = config.resolution;
    let mut glossy_views = Vec::with_capacity(cameras.len());
    let mut diffuse_views = Vec::with_capacity(cameras.len());
    for cam in &cameras {
        let g = render_with_coverage(&scene, cam, ShadingMode::Glossy, res)?;
        let d = render_with_coverage(&scene, cam, ShadingMode::Diffuse, res)?;
        if g.coverage != d.coverage {
            return Err(Error::Dataset(format!("scene {scene_id}: glossy and diffuse silhouettes differ")));
        }
        glossy_views.push(g.image);
        diffuse_views.push(d.image);
    }
    let gt_correspondences = (0..triplets_per_scene(cameras.len()))
        .map(|t| {
            let params = GroundTruthParams {
                k: config.gt_per_triplet,
                resolution: res,
                patch_size: config.patch_size(),
                min_visible: 0,
                seed: derive_seed(master, &[scene_id, 2, t as u64]),
            };
            let cams = [cameras[t], cameras[t + 1], cameras[t + 2]];
            ground_truth_correspondences(&scene, &cams, &params)
        })
        .collect();
    Ok(RenderedScenePacket {
        scene,
        cameras,
        glossy_views,
        diffuse_views,
        gt_correspondences,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub scene_id: u64,
    pub kind: String,
    pub views: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletEntry {
    pub scene_id: u64,
    pub triplet: usize,
    /// Correspondence count per source (`gt`, `feat`).
    pub counts: BTreeMap<String, usize>,
}

impl TripletEntry {
    pub fn count(&self, source: CorrSource) -> usize {
        self.counts.get(source.as_str()).copied().unwrap_or(0)
    }

    pub fn views(&self) -> [usize; 3] {
        [self.triplet, self.triplet + 1, self.triplet + 2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub config_hash: String,
    pub config: DatagenConfig,
    pub min_corr: usize,
    pub scenes: Vec<SceneEntry>,
    /// Triplets with at least `min_corr` correspondences from some source.
    pub triplets: Vec<TripletEntry>,
}

impl DatasetManifest {
    pub fn triplets_for(&self, source: CorrSource) -> Vec<&TripletEntry> {
        self.triplets.iter().filter(|t| t.count(source) >= self.min_corr).collect()
    }
}

pub fn config_hash(config: &DatagenConfig) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn scene_dir(root: &Path, scene_id: u64) -> PathBuf {
    root.join("scenes").join(scene_id.to_string())
}

pub fn view_path(root: &Path, scene_id: u64, mode: ShadingMode, view: usize) -> PathBuf {
    let prefix = match mode {
        ShadingMode::Glossy => "glossy",
        ShadingMode::Diffuse => "diffuse",
    };
    scene_dir(root, scene_id).join(format!("{prefix}_{view}.png"))
}

pub fn corr_path(root: &Path, scene_id: u64, triplet: usize) -> PathBuf {
    root.join("corr").join(format!("{scene_id}_{triplet}.jsonl"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_packet(root: &Path, packet: &RenderedScenePacket) -> Result<()> {
    let id = packet.scene.scene_id;
    create_dir(&scene_dir(root, id))?;
    for (v, (g, d)) in packet.glossy_views.iter().zip(&packet.diffuse_views).enumerate() {
        g.save_png(&view_path(root, id, ShadingMode::Glossy, v))?;
        d.save_png(&view_path(root, id, ShadingMode::Diffuse, v))?;
    }
    write_json(
        &scene_dir(root, id).join("scene.json"),
        &SceneMeta {
            scene: packet.scene.clone(),
            cameras: packet.cameras.clone(),
        },
    )?;
    for (t, corrs) in packet.gt_correspondences.iter().enumerate() {
        let recs: Vec<CorrRecord> = corrs.iter().map(|c| CorrRecord::new(t, c, CorrSource::Gt)).collect();
        write_records(&corr_path(root, id, t), &recs)?;
    }
    Ok(())
}

/// Renders every scene, writes the on-disk layout and returns the manifest.
///
/// A marker file flags the directory as partial until the manifest is written.
pub fn generate_dataset(config: &DatagenConfig, out_dir: &Path) -> Result<DatasetManifest> {
    config.validate()?;
    create_dir(&out_dir.join("scenes"))?;
    create_dir(&out_dir.join("corr"))?;
    let marker = out_dir.join(INCOMPLETE_MARKER);
    std::fs::write(&marker, b"dataset generation in progress\n").map_err(|e| Error::io(&marker, e))?;

    let ids: Vec<u64> = (0..config.n_scenes as u64).collect();
    let summaries = ids
        .par_iter()
        .map(|&id| {
            let packet = render_scene_packet(config, id)?;
            write_packet(out_dir, &packet)?;
            log::debug!("rendered scene {id}");
            let counts: Vec<usize> = packet.gt_correspondences.iter().map(Vec::len).collect();
            Ok((packet.scene.geometry.kind().to_string(), counts))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut scenes = Vec::new();
    let mut triplets = Vec::new();
    for (id, (kind, counts)) in ids.iter().zip(summaries) {
        scenes.push(SceneEntry {
            scene_id: *id,
            kind,
            views: config.n_views,
        });
        for (t, n) in counts.into_iter().enumerate() {
            if n >= config.min_corr {
                triplets.push(TripletEntry {
                    scene_id: *id,
                    triplet: t,
                    counts: BTreeMap::from([(CorrSource::Gt.as_str().to_string(), n)]),
                });
            }
        }
    }
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        config_hash: config_hash(config)?,
        config: config.clone(),
        min_corr: config.min_corr,
        scenes,
        triplets,
    };
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    std::fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
    Ok(manifest)
}

/// Read access to a generated dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        if root.join(INCOMPLETE_MARKER).exists() {
            return Err(Error::Dataset(format!("{} is an incomplete dataset", root.display())));
        }
        let path = root.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Dataset(format!("{}: malformed manifest: {e}", path.display())))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::Dataset(format!("unsupported manifest version {}", manifest.version)));
        }
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn resolution(&self) -> usize {
        self.manifest.config.resolution
    }

    pub fn patch_size(&self) -> usize {
        self.manifest.config.patch_size()
    }

    pub fn load_view(&self, scene_id: u64, mode: ShadingMode, view: usize) -> Result<ImageTensor> {
        ImageTensor::load_png(&view_path(&self.root, scene_id, mode, view))
    }

    pub fn load_views(&self, scene_id: u64, mode: ShadingMode) -> Result<Vec<ImageTensor>> {
        let n = self.scene(scene_id)?.views;
        (0..n).map(|v| self.load_view(scene_id, mode, v)).collect()
    }

    pub fn scene(&self, scene_id: u64) -> Result<&SceneEntry> {
        self.manifest
            .scenes
            .iter()
            .find(|s| s.scene_id == scene_id)
            .ok_or_else(|| Error::Dataset(format!("scene {scene_id} not in manifest")))
    }

    pub fn scene_meta(&self, scene_id: u64) -> Result<SceneMeta> {
        let path = scene_dir(&self.root, scene_id).join("scene.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))
    }

    pub fn load_records(&self, scene_id: u64, triplet: usize) -> Result<Vec<CorrRecord>> {
        let path = corr_path(&self.root, scene_id, triplet);
        if !path.exists() {
            return Ok(Vec::new());
        }
        read_records(&path)
    }

    pub fn load_correspondences(&self, scene_id: u64, triplet: usize, source: CorrSource) -> Result<Vec<CorrespondenceTriplet>> {
        Ok(self
            .load_records(scene_id, triplet)?
            .iter()
            .filter(|r| r.source == source)
            .map(CorrRecord::triplet)
            .collect())
    }

    /// Replaces one source's records for a triplet and updates the manifest in memory.
    pub fn replace_records(&mut self, scene_id: u64, triplet: usize, source: CorrSource, corrs: &[CorrespondenceTriplet]) -> Result<()> {
        let mut recs: Vec<CorrRecord> = self.load_records(scene_id, triplet)?.into_iter().filter(|r| r.source != source).collect();
        recs.extend(corrs.iter().map(|c| CorrRecord::new(triplet, c, source)));
        write_records(&corr_path(&self.root, scene_id, triplet), &recs)?;

        let min_corr = self.manifest.min_corr;
        let entries = &mut self.manifest.triplets;
        match entries.iter().position(|e| e.scene_id == scene_id && e.triplet == triplet) {
            Some(i) => {
                entries[i].counts.insert(source.as_str().to_string(), corrs.len());
            }
            None if corrs.len() >= min_corr => {
                let gt = recs.iter().filter(|r| r.source == CorrSource::Gt).count();
                let mut counts = BTreeMap::new();
                if source != CorrSource::Gt {
                    counts.insert(CorrSource::Gt.as_str().to_string(), gt);
                }
                counts.insert(source.as_str().to_string(), corrs.len());
                entries.push(TripletEntry { scene_id, triplet, counts });
                entries.sort_by_key(|e| (e.scene_id, e.triplet));
            }
            None => {}
        }
        Ok(())
    }

    pub fn save_manifest(&self) -> Result<()> {
        write_json(&self.root.join(MANIFEST_FILE), &self.manifest)
    }
}
