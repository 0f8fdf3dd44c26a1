//! Middle-view anchored triplet matching with ratio, distance and border filters.

use serde::{Deserialize, Serialize};

use super::sift::{detect_features, Feature};
use super::{triplet_within_border, CorrespondenceTriplet};
use crate::image::ImageTensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchParams {
    /// Nearest over second-nearest descriptor distance must stay below this.
    pub ratio: f64,
    /// L2 bound on unit descriptors, applied to all three pairs.
    pub desc_max: f64,
    /// Pixel displacement bound as a fraction of the image width.
    pub disp_max_frac: f64,
    /// Patch side for the border rule; `None` means half the image width.
    pub patch_size: Option<usize>,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            ratio: 0.75,
            desc_max: 0.6,
            disp_max_frac: 0.25,
            patch_size: None,
        }
    }
}

fn desc_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| ((x - y) as f64).powi(2)).sum::<f64>().sqrt()
}

fn pix_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Index and distance of the nearest descriptor, if it passes the ratio test.
fn nearest(query: &Feature, pool: &[Feature], ratio: f64) -> Option<(usize, f64)> {
    let mut best = (usize::MAX, f64::INFINITY);
    let mut second = f64::INFINITY;
    for (i, f) in pool.iter().enumerate() {
        let d = desc_dist(&query.descriptor, &f.descriptor);
        if d < best.1 {
            second = best.1;
            best = (i, d);
        } else if d < second {
            second = d;
        }
    }
    (best.0 != usize::MAX && best.1 < ratio * second).then_some(best)
}

/// Triplets from detected features of the three views, sorted by score ascending.
pub fn match_triplet(views: [&ImageTensor; 3], params: &MatchParams) -> Vec<CorrespondenceTriplet> {
    let feats: Vec<Vec<Feature>> = views.iter().map(|v| detect_features(v)).collect();
    match_features([&feats[0], &feats[1], &feats[2]], views[1].width(), views[1].height(), params)
}

pub(crate) fn match_features(
    feats: [&[Feature]; 3],
    width: usize,
    height: usize,
    params: &MatchParams,
) -> Vec<CorrespondenceTriplet> {
    let patch = params.patch_size.unwrap_or(width / 2);
    let disp_max = params.disp_max_frac * width as f64;
    let mut out: Vec<CorrespondenceTriplet> = Vec::new();
    for f2 in feats[1] {
        let (Some((i1, d12)), Some((i3, d23))) = (nearest(f2, feats[0], params.ratio), nearest(f2, feats[2], params.ratio))
        else {
            continue;
        };
        let (f1, f3) = (&feats[0][i1], &feats[2][i3]);
        let d13 = desc_dist(&f1.descriptor, &f3.descriptor);
        let score = d12.max(d23).max(d13);
        if score > params.desc_max {
            continue;
        }
        let (p1, p2, p3) = (f1.position, f2.position, f3.position);
        if pix_dist(p1, p2) > disp_max || pix_dist(p2, p3) > disp_max || pix_dist(p1, p3) > disp_max {
            continue;
        }
        let c = CorrespondenceTriplet { p1, p2, p3, score };
        if triplet_within_border(&c, width, height, patch) {
            out.push(c);
        }
    }
    out.sort_by(|a, b| {
        a.score
            .total_cmp(&b.score)
            .then(a.p2[1].total_cmp(&b.p2[1]))
            .then(a.p2[0].total_cmp(&b.p2[0]))
    });
    // several orientations at one keypoint may yield the same triplet; keep the best-scored copy
    let mut seen = Vec::new();
    out.retain(|c| {
        let key = c.points().map(|p| p.map(f64::to_bits));
        if seen.contains(&key) {
            false
        } else {
            seen.push(key);
            true
        }
    });
    out
}
