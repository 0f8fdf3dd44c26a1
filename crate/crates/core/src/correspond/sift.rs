//! Difference-of-Gaussians keypoints with 4x4x8 gradient-histogram descriptors.

use std::f64::consts::TAU;

use crate::image::ImageTensor;

pub const DESCRIPTOR_LEN: usize = 128;

const MIN_SIDE: usize = 16;
const SCALES_PER_OCTAVE: usize = 3;
const SIGMA0: f64 = 1.6;
const INPUT_BLUR: f64 = 0.5;
const CONTRAST_THRESHOLD: f64 = 0.01;
const EDGE_RATIO: f64 = 10.0;
const BORDER: usize = 5;
const ORI_BINS: usize = 36;
const ORI_PEAK_RATIO: f64 = 0.8;
const DESC_WIDTH: usize = 4;
const DESC_BINS: usize = 8;
const DESC_CLIP: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    /// `[x, y]` in image pixel coordinates.
    pub position: [f64; 2],
    /// Gaussian scale in image pixels.
    pub scale: f64,
    /// Radians in `[0, 2pi)`, measured from +x toward +y (down).
    pub orientation: f64,
    /// Unit L2 norm.
    pub descriptor: Vec<f32>,
}

#[derive(Clone)]
struct Gray {
    w: usize,
    h: usize,
    data: Vec<f32>,
}

impl Gray {
    fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.w + x]
    }

    fn clamped(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.w as isize - 1) as usize;
        let y = y.clamp(0, self.h as isize - 1) as usize;
        self.at(x, y)
    }

    /// Sample `u` of the result sits at source coordinate `u / 2`.
    fn upsample2(&self) -> Gray {
        let (w, h) = (self.w * 2, self.h * 2);
        let mut data = Vec::with_capacity(w * h);
        for v in 0..h {
            let sy = v as f32 * 0.5;
            let (y0, fy) = (sy.floor() as isize, sy.fract());
            for u in 0..w {
                let sx = u as f32 * 0.5;
                let (x0, fx) = (sx.floor() as isize, sx.fract());
                let top = self.clamped(x0, y0) * (1.0 - fx) + self.clamped(x0 + 1, y0) * fx;
                let bot = self.clamped(x0, y0 + 1) * (1.0 - fx) + self.clamped(x0 + 1, y0 + 1) * fx;
                data.push(top * (1.0 - fy) + bot * fy);
            }
        }
        Gray { w, h, data }
    }

    fn downsample2(&self) -> Gray {
        let (w, h) = (self.w / 2, self.h / 2);
        let data = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).map(|(x, y)| self.at(2 * x, 2 * y)).collect();
        Gray { w, h, data }
    }

    fn blur(&self, sigma: f64) -> Gray {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil() as isize;
        let mut kernel: Vec<f32> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp() as f32).collect();
        let sum: f32 = kernel.iter().sum();
        kernel.iter_mut().for_each(|k| *k /= sum);
        let pass = |src: &Gray, horizontal: bool| {
            let mut out = vec![0.0f32; src.w * src.h];
            for y in 0..src.h as isize {
                for x in 0..src.w as isize {
                    let mut acc = 0.0;
                    for (k, &kw) in kernel.iter().enumerate() {
                        let o = k as isize - radius;
                        acc += kw * if horizontal { src.clamped(x + o, y) } else { src.clamped(x, y + o) };
                    }
                    out[y as usize * src.w + x as usize] = acc;
                }
            }
            Gray { w: src.w, h: src.h, data: out }
        };
        pass(&pass(self, true), false)
    }

    fn sub(&self, other: &Gray) -> Gray {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Gray { w: self.w, h: self.h, data }
    }

    /// Central-difference gradient, y pointing down.
    fn gradient(&self, x: usize, y: usize) -> (f64, f64) {
        let dx = self.at(x + 1, y) as f64 - self.at(x - 1, y) as f64;
        let dy = self.at(x, y + 1) as f64 - self.at(x, y - 1) as f64;
        (dx, dy)
    }
}

struct Octave {
    gauss: Vec<Gray>,
    dog: Vec<Gray>,
}

fn build_pyramid(base: Gray) -> Vec<Octave> {
    let s = SCALES_PER_OCTAVE;
    let k = 2f64.powf(1.0 / s as f64);
    let sigmas: Vec<f64> = (0..s + 3).map(|i| SIGMA0 * k.powi(i as i32)).collect();
    let mut octaves = Vec::new();
    let mut first = base.blur((SIGMA0 * SIGMA0 - (2.0 * INPUT_BLUR).powi(2)).sqrt());
    while first.w.min(first.h) >= MIN_SIDE {
        let mut gauss = vec![first.clone()];
        for i in 1..s + 3 {
            let inc = (sigmas[i] * sigmas[i] - sigmas[i - 1] * sigmas[i - 1]).sqrt();
            let next = gauss[i - 1].blur(inc);
            gauss.push(next);
        }
        let dog = gauss.windows(2).map(|p| p[1].sub(&p[0])).collect();
        first = gauss[s].downsample2();
        octaves.push(Octave { gauss, dog });
    }
    octaves
}

fn is_extremum(dog: &[Gray], l: usize, x: usize, y: usize) -> bool {
    let v = dog[l].at(x, y);
    let (mut is_max, mut is_min) = (true, true);
    for layer in &dog[l - 1..=l + 1] {
        for yy in y - 1..=y + 1 {
            for xx in x - 1..=x + 1 {
                let n = layer.at(xx, yy);
                if std::ptr::eq(layer, &dog[l]) && xx == x && yy == y {
                    continue;
                }
                is_max &= v > n;
                is_min &= v < n;
            }
        }
    }
    is_max || is_min
}

struct Extremum {
    x: usize,
    y: usize,
    layer: usize,
    offset: [f64; 3],
}

/// Quadratic refinement; `None` when the point drifts away, has low contrast, or lies on an edge.
fn refine(dog: &[Gray], mut x: usize, mut y: usize, mut l: usize) -> Option<Extremum> {
    let s = SCALES_PER_OCTAVE;
    let (w, h) = (dog[0].w, dog[0].h);
    for _ in 0..5 {
        let d = |ll: usize, xx: usize, yy: usize| dog[ll].at(xx, yy) as f64;
        let v = d(l, x, y);
        let g = [
            (d(l, x + 1, y) - d(l, x - 1, y)) * 0.5,
            (d(l, x, y + 1) - d(l, x, y - 1)) * 0.5,
            (d(l + 1, x, y) - d(l - 1, x, y)) * 0.5,
        ];
        let dxx = d(l, x + 1, y) + d(l, x - 1, y) - 2.0 * v;
        let dyy = d(l, x, y + 1) + d(l, x, y - 1) - 2.0 * v;
        let dss = d(l + 1, x, y) + d(l - 1, x, y) - 2.0 * v;
        let dxy = (d(l, x + 1, y + 1) - d(l, x - 1, y + 1) - d(l, x + 1, y - 1) + d(l, x - 1, y - 1)) * 0.25;
        let dxs = (d(l + 1, x + 1, y) - d(l + 1, x - 1, y) - d(l - 1, x + 1, y) + d(l - 1, x - 1, y)) * 0.25;
        let dys = (d(l + 1, x, y + 1) - d(l + 1, x, y - 1) - d(l - 1, x, y + 1) + d(l - 1, x, y - 1)) * 0.25;
        let hm = [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]];
        let off = solve3(hm, [-g[0], -g[1], -g[2]])?;
        if off.iter().all(|o| o.abs() < 0.5) {
            let contrast = v + 0.5 * (g[0] * off[0] + g[1] * off[1] + g[2] * off[2]);
            if contrast.abs() < CONTRAST_THRESHOLD / s as f64 {
                return None;
            }
            let (tr, det) = (dxx + dyy, dxx * dyy - dxy * dxy);
            if det <= 0.0 || tr * tr * EDGE_RATIO >= (EDGE_RATIO + 1.0).powi(2) * det {
                return None;
            }
            return Some(Extremum { x, y, layer: l, offset: off });
        }
        if off.iter().any(|o| o.abs() > 1e3 || !o.is_finite()) {
            return None;
        }
        let step = |c: usize, o: f64| (c as f64 + o.round()) as isize;
        let (nx, ny, nl) = (step(x, off[0]), step(y, off[1]), step(l, off[2]));
        if nl < 1 || nl > s as isize || nx < BORDER as isize || nx >= (w - BORDER) as isize || ny < BORDER as isize || ny >= (h - BORDER) as isize {
            return None;
        }
        (x, y, l) = (nx as usize, ny as usize, nl as usize);
    }
    None
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    if d.abs() < 1e-12 {
        return None;
    }
    let mut x = [0.0; 3];
    for (c, xc) in x.iter_mut().enumerate() {
        let mut m = a;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        *xc = det(m) / d;
    }
    Some(x)
}

fn orientations(img: &Gray, x: usize, y: usize, sigma: f64) -> Vec<f64> {
    let radius = (3.0 * 1.5 * sigma).round() as isize;
    let weight_scale = -1.0 / (2.0 * (1.5 * sigma).powi(2));
    let mut hist = [0.0f64; ORI_BINS];
    for i in -radius..=radius {
        let yy = y as isize + i;
        if yy <= 0 || yy >= img.h as isize - 1 {
            continue;
        }
        for j in -radius..=radius {
            let xx = x as isize + j;
            if xx <= 0 || xx >= img.w as isize - 1 {
                continue;
            }
            let (dx, dy) = img.gradient(xx as usize, yy as usize);
            let mag = (dx * dx + dy * dy).sqrt();
            let angle = dy.atan2(dx).rem_euclid(TAU);
            let bin = ((angle / TAU * ORI_BINS as f64).round() as usize) % ORI_BINS;
            hist[bin] += mag * ((i * i + j * j) as f64 * weight_scale).exp();
        }
    }
    let n = ORI_BINS;
    let smooth: Vec<f64> = (0..n)
        .map(|b| {
            (hist[(b + n - 2) % n] + hist[(b + 2) % n]) / 16.0 + (hist[(b + n - 1) % n] + hist[(b + 1) % n]) * 4.0 / 16.0
                + hist[b] * 6.0 / 16.0
        })
        .collect();
    let max = smooth.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for b in 0..n {
        let (l, r) = (smooth[(b + n - 1) % n], smooth[(b + 1) % n]);
        let v = smooth[b];
        if v > l && v > r && v >= ORI_PEAK_RATIO * max {
            let interp = b as f64 + 0.5 * (l - r) / (l - 2.0 * v + r);
            out.push((interp / n as f64 * TAU).rem_euclid(TAU));
        }
    }
    out
}

fn descriptor(img: &Gray, x: f64, y: f64, sigma: f64, ori: f64) -> Option<Vec<f32>> {
    let d = DESC_WIDTH as f64;
    let hist_width = 3.0 * sigma;
    let radius = (hist_width * std::f64::consts::SQRT_2 * (d + 1.0) * 0.5).round() as isize;
    let (sin_t, cos_t) = ori.sin_cos();
    let (cx, cy) = (x.round() as isize, y.round() as isize);
    let mut hist = vec![0.0f64; DESC_WIDTH * DESC_WIDTH * DESC_BINS];
    for i in -radius..=radius {
        for j in -radius..=radius {
            let (px, py) = (cx + j, cy + i);
            if px <= 0 || py <= 0 || px >= img.w as isize - 1 || py >= img.h as isize - 1 {
                continue;
            }
            let (ox, oy) = (px as f64 - x, py as f64 - y);
            // rotate the offset into the keypoint frame
            let c_rot = (ox * cos_t + oy * sin_t) / hist_width;
            let r_rot = (-ox * sin_t + oy * cos_t) / hist_width;
            let cbin = c_rot + d / 2.0 - 0.5;
            let rbin = r_rot + d / 2.0 - 0.5;
            if cbin <= -1.0 || cbin >= d || rbin <= -1.0 || rbin >= d {
                continue;
            }
            let (gx, gy) = img.gradient(px as usize, py as usize);
            let mag = (gx * gx + gy * gy).sqrt() * (-(c_rot * c_rot + r_rot * r_rot) / (0.5 * d * d)).exp();
            let obin = (gy.atan2(gx) - ori).rem_euclid(TAU) / TAU * DESC_BINS as f64;
            let (r0, c0, o0) = (rbin.floor(), cbin.floor(), obin.floor());
            let (fr, fc, fo) = (rbin - r0, cbin - c0, obin - o0);
            for (dr, wr) in [(0, 1.0 - fr), (1, fr)] {
                let r = r0 as isize + dr;
                if r < 0 || r >= DESC_WIDTH as isize {
                    continue;
                }
                for (dc, wc) in [(0, 1.0 - fc), (1, fc)] {
                    let c = c0 as isize + dc;
                    if c < 0 || c >= DESC_WIDTH as isize {
                        continue;
                    }
                    for (dob, wo) in [(0, 1.0 - fo), (1, fo)] {
                        let o = (o0 as usize + dob) % DESC_BINS;
                        hist[(r as usize * DESC_WIDTH + c as usize) * DESC_BINS + o] += mag * wr * wc * wo;
                    }
                }
            }
        }
    }
    let norm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= 1e-12 {
        return None;
    }
    hist.iter_mut().for_each(|v| *v = (*v / norm).min(DESC_CLIP));
    let norm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    Some(hist.iter().map(|v| (v / norm) as f32).collect())
}

/// Keypoints ordered by y, then x, then scale, then orientation.
pub fn detect_features(img: &ImageTensor) -> Vec<Feature> {
    if img.width() < MIN_SIDE || img.height() < MIN_SIDE {
        return Vec::new();
    }
    let gray = Gray {
        w: img.width(),
        h: img.height(),
        data: img.luminance(),
    };
    let (width, height) = (gray.w as f64, gray.h as f64);
    let pyramid = build_pyramid(gray.upsample2());
    let s = SCALES_PER_OCTAVE;
    let threshold = (0.5 * CONTRAST_THRESHOLD / s as f64) as f32;
    let mut out = Vec::new();
    for (o, oct) in pyramid.iter().enumerate() {
        let (w, h) = (oct.dog[0].w, oct.dog[0].h);
        if w <= 2 * BORDER || h <= 2 * BORDER {
            continue;
        }
        // octave pixels to input pixels: 2^o per octave step, halved for the initial upsampling
        let to_image = 2f64.powi(o as i32) * 0.5;
        for l in 1..=s {
            for y in BORDER..h - BORDER {
                for x in BORDER..w - BORDER {
                    if oct.dog[l].at(x, y).abs() <= threshold || !is_extremum(&oct.dog, l, x, y) {
                        continue;
                    }
                    let Some(e) = refine(&oct.dog, x, y, l) else { continue };
                    let sigma_oct = SIGMA0 * 2f64.powf((e.layer as f64 + e.offset[2]) / s as f64);
                    let gauss = &oct.gauss[e.layer];
                    let (fx, fy) = (e.x as f64 + e.offset[0], e.y as f64 + e.offset[1]);
                    let position = [fx * to_image, fy * to_image];
                    if !(0.0..=width - 1.0).contains(&position[0]) || !(0.0..=height - 1.0).contains(&position[1]) {
                        continue;
                    }
                    for ori in orientations(gauss, e.x, e.y, sigma_oct) {
                        if let Some(descriptor) = descriptor(gauss, fx, fy, sigma_oct, ori) {
                            out.push(Feature {
                                position,
                                scale: sigma_oct * to_image,
                                orientation: ori,
                                descriptor,
                            });
                        }
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| {
        a.position[1]
            .total_cmp(&b.position[1])
            .then(a.position[0].total_cmp(&b.position[0]))
            .then(a.scale.total_cmp(&b.scale))
            .then(a.orientation.total_cmp(&b.orientation))
    });
    out.dedup_by(|a, b| a == b);
    out
}
