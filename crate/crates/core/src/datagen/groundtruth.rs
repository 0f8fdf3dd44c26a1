//! Exact correspondences from the renderer's own geometry.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::camera::{CameraFrame, CameraPose};
use super::geometry::Vec3;
use super::render::Tracer;
use super::scene::SceneSpec;
use crate::correspond::{triplet_within_border, CorrespondenceTriplet};

/// Surfaces seen more obliquely than this (cosine) are not sampled.
pub const MIN_FACING: f64 = 0.2;
/// World-space tolerance for a re-cast ray to count as hitting the same point.
pub const SAME_POINT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthParams {
    /// Upper bound on the number of triplets.
    pub k: usize,
    pub resolution: usize,
    pub patch_size: usize,
    /// Fewer mutually visible points than this yields an empty list.
    pub min_visible: usize,
    /// Seeds the order in which middle-view pixels are visited.
    pub seed: u64,
}

/// Pixel where `point` is the first hit seen from `frame`, if it is and faces the camera.
fn visible_at(tracer: &Tracer, frame: &CameraFrame, point: Vec3) -> Option<[f64; 2]> {
    let (x, y) = frame.project(point)?;
    let dir = frame.ray(x, y);
    let hit = tracer.trace(frame.origin, dir)?;
    let same = (hit.point - point).length() < SAME_POINT_TOL;
    (same && -hit.normal.dot(dir) >= MIN_FACING).then_some([x, y])
}

/// Up to `k` triplets of sub-pixel coordinates naming one surface point each, anchored
/// at middle-view pixel centers and obeying the patch border rule in all views.
pub fn ground_truth_correspondences(
    scene: &SceneSpec,
    cameras: &[CameraPose; 3],
    params: &GroundTruthParams,
) -> Vec<CorrespondenceTriplet> {
    let res = params.resolution;
    if params.k == 0 || res == 0 {
        return Vec::new();
    }
    let tracer = Tracer::new(scene);
    let frames = cameras.map(|c| c.frame(res, res));
    let mut pixels: Vec<usize> = (0..res * res).collect();
    pixels.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
    let mut out = Vec::new();
    for idx in pixels {
        let p2 = [(idx % res) as f64, (idx / res) as f64];
        let dir = frames[1].ray(p2[0], p2[1]);
        let Some(hit) = tracer.trace(frames[1].origin, dir) else { continue };
        if -hit.normal.dot(dir) < MIN_FACING {
            continue;
        }
        let (Some(p1), Some(p3)) = (
            visible_at(&tracer, &frames[0], hit.point),
            visible_at(&tracer, &frames[2], hit.point),
        ) else {
            continue;
        };
        let c = CorrespondenceTriplet { p1, p2, p3, score: 0.0 };
        if triplet_within_border(&c, res, res, params.patch_size) {
            out.push(c);
            if out.len() == params.k {
                break;
            }
        }
    }
    if out.len() < params.min_visible {
        out.clear();
    }
    out
}
