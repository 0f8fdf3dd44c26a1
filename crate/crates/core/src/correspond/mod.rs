//! Correspondence triplets across three consecutive views: detection, matching,
//! filtering, patch extraction and the on-disk record format.

mod matching;
mod sift;

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageTensor;

pub use matching::{match_triplet, MatchParams};
pub use sift::{detect_features, Feature, DESCRIPTOR_LEN};

/// Triplet samples with fewer correspondences are discarded.
pub const MIN_TRIPLET_CORRESPONDENCES: usize = 10;

/// Pixel coordinates `[x, y]` (x right, y down, integers at pixel centers) of one
/// surface feature in each of three views.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceTriplet {
    pub p1: [f64; 2],
    pub p2: [f64; 2],
    pub p3: [f64; 2],
    /// Largest pairwise descriptor distance; 0 for ground truth.
    pub score: f64,
}

impl CorrespondenceTriplet {
    pub fn points(&self) -> [[f64; 2]; 3] {
        [self.p1, self.p2, self.p3]
    }
}

pub fn accept_triplet_sample(corrs: &[CorrespondenceTriplet]) -> bool {
    corrs.len() >= MIN_TRIPLET_CORRESPONDENCES
}

/// Top-left corner of the `patch`-sized window centered at rounded `p`, if it fits.
pub fn patch_origin(p: [f64; 2], width: usize, height: usize, patch: usize) -> Option<(usize, usize)> {
    let half = (patch / 2) as f64;
    let (x0, y0) = (p[0].round() - half, p[1].round() - half);
    let fits = |o: f64, extent: usize| o >= 0.0 && o + patch as f64 <= extent as f64;
    (p[0].is_finite() && p[1].is_finite() && fits(x0, width) && fits(y0, height)).then_some((x0 as usize, y0 as usize))
}

/// True iff a `patch`-sized crop centered at rounded `p` lies inside the image.
pub fn within_border(p: [f64; 2], width: usize, height: usize, patch: usize) -> bool {
    patch_origin(p, width, height, patch).is_some()
}

pub fn triplet_within_border(c: &CorrespondenceTriplet, width: usize, height: usize, patch: usize) -> bool {
    c.points().iter().all(|&p| within_border(p, width, height, patch))
}

/// Crops centered at each rounded `p_i`.
pub fn extract_patches(views: [&ImageTensor; 3], corr: &CorrespondenceTriplet, patch: usize) -> Result<[ImageTensor; 3]> {
    let crop = |view: &ImageTensor, p: [f64; 2]| {
        let (x0, y0) = patch_origin(p, view.width(), view.height(), patch).ok_or(Error::BorderViolation {
            x: p[0] as f32,
            y: p[1] as f32,
            size: patch,
        })?;
        view.crop(x0, y0, patch, patch)
    };
    Ok([crop(views[0], corr.p1)?, crop(views[1], corr.p2)?, crop(views[2], corr.p3)?])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrSource {
    Gt,
    Feat,
}

impl CorrSource {
    pub fn as_str(self) -> &'static str {
        match self {
            CorrSource::Gt => "gt",
            CorrSource::Feat => "feat",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gt" => Ok(CorrSource::Gt),
            "feat" => Ok(CorrSource::Feat),
            other => Err(Error::Config(format!("unknown correspondence source `{other}` (known: gt, feat)"))),
        }
    }
}

/// One line of a `corr/<scene>_<t>.jsonl` file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrRecord {
    pub triplet: usize,
    pub p1: [f64; 2],
    pub p2: [f64; 2],
    pub p3: [f64; 2],
    pub source: CorrSource,
}

impl CorrRecord {
    pub fn new(triplet: usize, c: &CorrespondenceTriplet, source: CorrSource) -> Self {
        Self {
            triplet,
            p1: c.p1,
            p2: c.p2,
            p3: c.p3,
            source,
        }
    }

    pub fn triplet(&self) -> CorrespondenceTriplet {
        CorrespondenceTriplet {
            p1: self.p1,
            p2: self.p2,
            p3: self.p3,
            score: 0.0,
        }
    }
}

pub fn write_records(path: &Path, records: &[CorrRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<CorrRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::Dataset(format!("{}:{}: malformed record: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}
