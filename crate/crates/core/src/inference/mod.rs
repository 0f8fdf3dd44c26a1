//! Sliding-window translation of view sequences of any length.

use std::path::{Path, PathBuf};

use candle_core::{DType, Device, Tensor};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::network::{concat_views, split_views, Checkpoint, Generator};
use crate::training::GeneratorSnapshot;

pub const DEFAULT_PATTERN: &str = "glossy_*.png";

/// Indices of the window centered at view `i` of `n`, clamped at both ends.
pub fn window_indices(i: usize, n: usize) -> [usize; 3] {
    [i.saturating_sub(1), i, (i + 1).min(n - 1)]
}

/// Translates view `i` from the triplet `(i-1, i, i+1)` and keeps the middle third
/// of each window's output, so every view is produced exactly once.
///
/// `net` maps a `(1, 3, H, 3W)` sequence to a sequence of the same shape.
pub fn translate_sequence<F>(net: F, views: &[ImageTensor]) -> Result<Vec<ImageTensor>>
where
    F: Fn(&Tensor) -> Result<Tensor> + Sync,
{
    let Some(first) = views.first() else {
        return Err(Error::Argument("cannot translate an empty sequence".into()));
    };
    if let Some((i, v)) = views.iter().enumerate().find(|(_, v)| v.shape() != first.shape()) {
        return Err(Error::Argument(format!(
            "view {i} has shape {:?}, view 0 has {:?}",
            v.shape(),
            first.shape()
        )));
    }
    let n = views.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let [a, b, c] = window_indices(i, n);
            let seq = concat_views(&[views[a].clone(), views[b].clone(), views[c].clone()])?;
            let out = net(&seq.to_tensor(DType::F32, &Device::Cpu)?)?;
            let [_, mid, _] = split_views(&ImageTensor::from_tensor(&out)?)?;
            Ok(mid)
        })
        .collect()
}

pub fn translate_with_generator(g: &Generator, views: &[ImageTensor]) -> Result<Vec<ImageTensor>> {
    translate_sequence(|x| g.forward(x), views)
}

/// The glossy-to-diffuse generator of a training checkpoint, on the CPU in f32.
pub fn load_translator(path: &Path) -> Result<Generator> {
    GeneratorSnapshot::load_b(&Checkpoint::load(path)?, DType::F32, &Device::Cpu)
}

pub fn output_name(i: usize) -> String {
    format!("translated_{i:03}.png")
}

/// Writes `translated_000.png`, `translated_001.png`, ... and returns the paths in order.
pub fn save_sequence(views: &[ImageTensor], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if views.is_empty() {
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    views
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let path = out_dir.join(output_name(i));
            v.save_png(&path)?;
            Ok(path)
        })
        .collect()
}

/// Trailing decimal digits of a file stem; files without one sort after numbered ones.
fn view_number(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let digits = stem.len() - stem.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    stem[stem.len() - digits..].parse().ok()
}

/// Files in `dir` matching the glob `pattern`, ordered by their trailing view number.
pub fn list_views(dir: &Path, pattern: &str) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::Argument(format!("input directory {} does not exist", dir.display())));
    }
    let full = dir.join(pattern);
    let full = full.to_str().ok_or_else(|| Error::Argument("input path is not valid UTF-8".into()))?;
    let paths = glob::glob(full).map_err(|e| Error::Argument(format!("bad pattern `{pattern}`: {e}")))?;
    let mut files: Vec<PathBuf> = paths.filter_map(|p| p.ok()).filter(|p| p.is_file()).collect();
    files.sort_by(|a, b| (view_number(a).is_none(), view_number(a), a).cmp(&(view_number(b).is_none(), view_number(b), b)));
    Ok(files)
}

pub fn load_views(files: &[PathBuf]) -> Result<Vec<ImageTensor>> {
    files.iter().map(|p| ImageTensor::load_png(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn view(i: usize) -> ImageTensor {
        ImageTensor::from_fn(4, 4, move |x, y| [i as f32 * 0.1, x as f32 * 0.2 - 0.5, y as f32 * 0.1])
    }

    #[test]
    fn clamped_windows() {
        assert_eq!(window_indices(0, 1), [0, 0, 0]);
        assert_eq!(window_indices(0, 5), [0, 0, 1]);
        assert_eq!(window_indices(4, 5), [3, 4, 4]);
        assert_eq!(window_indices(2, 5), [1, 2, 3]);
    }

    #[test]
    fn identity_generator_returns_inputs() {
        let views: Vec<_> = (0..3).map(view).collect();
        let out = translate_sequence(|x| Ok(x.clone()), &views).unwrap();
        assert_eq!(out, views);
    }

    #[test]
    fn single_view_uses_tripled_window() {
        let v = view(2);
        // a net that rolls the strip by one view exposes which views were fed
        let roll = |x: &Tensor| -> Result<Tensor> {
            let w = x.dim(3)? / 3;
            Ok(Tensor::cat(&[x.narrow(3, w, 2 * w)?, x.narrow(3, 0, w)?], 3)?)
        };
        assert_eq!(translate_sequence(roll, &[v.clone()]).unwrap(), vec![v]);
        let views: Vec<_> = (0..4).map(view).collect();
        let out = translate_sequence(roll, &views).unwrap();
        // middle third of the rolled window is the right neighbor, clamped at the end
        assert_eq!(out, vec![views[1].clone(), views[2].clone(), views[3].clone(), views[3].clone()]);
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let views = vec![view(0), ImageTensor::filled(4, 8, [0.0; 3])];
        assert!(matches!(translate_sequence(|x| Ok(x.clone()), &views), Err(Error::Argument(_))));
        assert!(matches!(translate_sequence(|x| Ok(x.clone()), &[]), Err(Error::Argument(_))));
    }

    #[test]
    fn save_names_and_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let views: Vec<_> = (0..3).map(view).collect();
        let files = save_sequence(&views, dir.path()).unwrap();
        let names: Vec<_> = files.iter().map(|p| p.file_name().unwrap().to_str().unwrap().to_string()).collect();
        assert_eq!(names, ["translated_000.png", "translated_001.png", "translated_002.png"]);
        for (v, p) in views.iter().zip(&files) {
            let back = ImageTensor::load_png(p).unwrap();
            let err = v.data().iter().zip(back.data()).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
            assert!(err <= 1.0 / 127.5 + 1e-6, "{err}");
        }
        assert!(save_sequence(&[], &dir.path().join("empty")).unwrap().is_empty());
        assert!(!dir.path().join("empty").exists());
    }

    #[test]
    fn views_listed_in_numeric_order() {
        let dir = tempfile::tempdir().unwrap();
        for i in [0, 2, 10, 1] {
            view(0).save_png(&dir.path().join(format!("glossy_{i}.png"))).unwrap();
        }
        view(0).save_png(&dir.path().join("diffuse_0.png")).unwrap();
        let files = list_views(dir.path(), DEFAULT_PATTERN).unwrap();
        let names: Vec<_> = files.iter().map(|p| p.file_name().unwrap().to_str().unwrap()).collect();
        assert_eq!(names, ["glossy_0.png", "glossy_1.png", "glossy_2.png", "glossy_10.png"]);
    }
}
