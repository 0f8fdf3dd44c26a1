use glossfree::correspond::{
    accept_triplet_sample, detect_features, extract_patches, match_triplet, patch_origin, read_records,
    triplet_within_border, within_border, write_records, CorrRecord, CorrSource, CorrespondenceTriplet, MatchParams,
    DESCRIPTOR_LEN, MIN_TRIPLET_CORRESPONDENCES,
};
use glossfree::ImageTensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIDE: usize = 96;

/// Sum of random Gaussian blobs, evaluated at continuous coordinates so shifts are exact.
struct Texture {
    blobs: Vec<(f64, f64, f64, f64)>,
}

impl Texture {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blobs = (0..60)
            .map(|_| {
                (
                    rng.gen_range(-20.0..SIDE as f64 + 20.0),
                    rng.gen_range(-20.0..SIDE as f64 + 20.0),
                    rng.gen_range(2.0..5.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        Self { blobs }
    }

    fn render(&self, dx: f64) -> ImageTensor {
        ImageTensor::from_fn(SIDE, SIDE, |x, y| {
            let (u, v) = (x as f64 - dx, y as f64);
            let s: f64 = self
                .blobs
                .iter()
                .map(|&(cx, cy, r, a)| a * (-((u - cx).powi(2) + (v - cy).powi(2)) / (2.0 * r * r)).exp())
                .sum();
            let g = s.tanh() as f32 * 0.9;
            [g, 0.5 * g, -g]
        })
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn border_rule_matches_its_definition(x in -10.0f64..80.0, y in -10.0f64..80.0, w in 8usize..72, h in 8usize..72, patch in 1usize..40) {
        let half = (patch / 2) as f64;
        let (x0, y0) = (x.round() - half, y.round() - half);
        let expected = x0 >= 0.0 && y0 >= 0.0 && x0 + patch as f64 <= w as f64 && y0 + patch as f64 <= h as f64;
        prop_assert_eq!(within_border([x, y], w, h, patch), expected);
        prop_assert_eq!(patch_origin([x, y], w, h, patch).is_some(), expected);

        let img = ImageTensor::filled(h, w, [0.0; 3]);
        let c = CorrespondenceTriplet { p1: [x, y], p2: [x, y], p3: [x, y], score: 0.0 };
        prop_assert_eq!(triplet_within_border(&c, w, h, patch), expected);
        match extract_patches([&img, &img, &img], &c, patch) {
            Ok(p) => {
                prop_assert!(expected);
                prop_assert!(p.iter().all(|v| v.shape() == (patch, patch)));
            }
            Err(_) => prop_assert!(!expected),
        }
    }
}

#[test]
fn non_finite_points_violate_the_border() {
    assert!(!within_border([f64::NAN, 10.0], 64, 64, 8));
    assert!(!within_border([10.0, f64::INFINITY], 64, 64, 8));
}

#[test]
fn patches_are_centered_on_the_rounded_point() {
    let img = ImageTensor::from_fn(16, 16, |x, y| [x as f32 / 16.0, y as f32 / 16.0, 0.0]);
    let c = CorrespondenceTriplet { p1: [7.6, 8.2], p2: [8.0, 8.0], p3: [4.0, 4.4], score: 0.0 };
    let [a, b, d] = extract_patches([&img, &img, &img], &c, 8).unwrap();
    assert_eq!(a.pixel(0, 0), img.pixel(4, 4));
    assert_eq!(b.pixel(0, 0), img.pixel(4, 4));
    assert_eq!(d.pixel(0, 0), img.pixel(0, 0));
}

#[test]
fn descriptors_are_unit_length() {
    let feats = detect_features(&Texture::new(1).render(0.0));
    assert!(feats.len() > 10, "{}", feats.len());
    for f in &feats {
        assert_eq!(f.descriptor.len(), DESCRIPTOR_LEN);
        let n: f64 = f.descriptor.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-4);
        assert!((0.0..std::f64::consts::TAU).contains(&f.orientation));
    }
}

#[test]
fn identical_views_give_degenerate_triplets() {
    let img = Texture::new(2).render(0.0);
    let params = MatchParams { patch_size: Some(16), ..MatchParams::default() };
    let corrs = match_triplet([&img, &img, &img], &params);
    assert!(!corrs.is_empty());
    for c in &corrs {
        assert_eq!(c.p1, c.p2);
        assert_eq!(c.p2, c.p3);
        assert_eq!(c.score, 0.0);
    }
}

#[test]
fn features_follow_a_five_pixel_shift() {
    let margin = 12.0;
    let (mut total, mut kept) = (0, 0);
    for seed in 0..4 {
        let tex = Texture::new(seed);
        let base = detect_features(&tex.render(0.0));
        for f in detect_features(&tex.render(5.0)) {
            let p = [f.position[0] - 5.0, f.position[1]];
            let interior = p[0] > margin && p[1] > margin && p[0] < SIDE as f64 - margin && p[1] < SIDE as f64 - margin;
            if !interior {
                continue;
            }
            total += 1;
            let near = base
                .iter()
                .any(|g| ((g.position[0] - p[0]).powi(2) + (g.position[1] - p[1]).powi(2)).sqrt() <= 1.0);
            kept += near as usize;
        }
    }
    assert!(total > 20, "{total}");
    let frac = kept as f64 / total as f64;
    assert!(frac >= 0.8, "{kept}/{total} = {frac}");
}

#[test]
fn unrelated_views_match_less_than_one_scene() {
    let params = MatchParams { patch_size: Some(16), ..MatchParams::default() };
    let n = 5u64;
    let mut same = 0usize;
    let mut unrelated = 0usize;
    for seed in 0..n {
        let tex = Texture::new(seed);
        let views = [tex.render(0.0), tex.render(3.0), tex.render(6.0)];
        same += match_triplet([&views[0], &views[1], &views[2]], &params).len();
        let others = [0, 1, 2].map(|k| Texture::new(1000 + 3 * seed + k).render(0.0));
        unrelated += match_triplet([&others[0], &others[1], &others[2]], &params).len();
    }
    let (same, unrelated) = (same as f64 / n as f64, unrelated as f64 / n as f64);
    assert!(unrelated < same, "unrelated {unrelated} vs same {same}");
    assert!(same >= MIN_TRIPLET_CORRESPONDENCES as f64);
}

#[test]
fn emitted_triplets_respect_every_threshold() {
    let params = MatchParams {
        ratio: 0.8,
        desc_max: 0.5,
        disp_max_frac: 0.1,
        patch_size: Some(24),
    };
    let disp_max = params.disp_max_frac * SIDE as f64;
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let mut emitted = 0;
    for seed in 0..4 {
        let tex = Texture::new(seed);
        let views = [tex.render(-4.0), tex.render(0.0), tex.render(4.0)];
        let corrs = match_triplet([&views[0], &views[1], &views[2]], &params);
        assert_eq!(corrs, match_triplet([&views[0], &views[1], &views[2]], &params));
        for c in &corrs {
            assert!(c.score <= params.desc_max);
            assert!(triplet_within_border(c, SIDE, SIDE, 24));
            assert!(dist(c.p1, c.p2) <= disp_max && dist(c.p2, c.p3) <= disp_max && dist(c.p1, c.p3) <= disp_max);
        }
        assert!(corrs.windows(2).all(|w| w[0].score <= w[1].score));
        emitted += corrs.len();
    }
    assert!(emitted > 0);
}

#[test]
fn min_ten_rule() {
    let c = CorrespondenceTriplet { p1: [0.0; 2], p2: [0.0; 2], p3: [0.0; 2], score: 0.0 };
    assert!(!accept_triplet_sample(&vec![c; 9]));
    assert!(accept_triplet_sample(&vec![c; 10]));
    assert!(!accept_triplet_sample(&[]));
}

#[test]
fn records_roundtrip_through_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("0_0.jsonl");
    let recs: Vec<CorrRecord> = (0..5)
        .map(|i| {
            let p = [i as f64 + 0.25, 1.0 / 3.0];
            let c = CorrespondenceTriplet { p1: p, p2: p, p3: p, score: 0.1 };
            CorrRecord::new(0, &c, if i % 2 == 0 { CorrSource::Gt } else { CorrSource::Feat })
        })
        .collect();
    write_records(&path, &recs).unwrap();
    assert_eq!(read_records(&path).unwrap(), recs);
    assert_eq!(CorrSource::parse("feat").unwrap(), CorrSource::Feat);
    assert!(CorrSource::parse("sift").is_err());
}
