//! Minimal CPU ray tracer: sphere-traced SDFs, shadow rays, Blinn-Phong shading.

use serde::{Deserialize, Serialize};

use super::camera::{CameraFrame, CameraPose};
use super::geometry::{Shape, Vec3};
use super::scene::{Light, SceneSpec, Sky};
use crate::error::{Error, Result};
use crate::image::ImageTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShadingMode {
    Glossy,
    Diffuse,
}

/// Fixed sub-pixel offsets; every render uses the same four.
pub const SUBSAMPLES: [(f64, f64); 4] = [(-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25)];

const HIT_EPS: f64 = 1e-6;
const MAX_STEPS: usize = 600;

#[derive(Debug, Clone, Copy)]
pub struct Hit {
    pub t: f64,
    pub point: Vec3,
    pub normal: Vec3,
}

/// Ray queries against one scene's object.
pub struct Tracer {
    shape: Box<dyn Shape>,
    bound: f64,
    lipschitz: f64,
}

impl Tracer {
    pub fn new(scene: &SceneSpec) -> Self {
        let shape = scene.geometry.build();
        Self {
            bound: shape.bound_radius() * 1.01 + 1e-3,
            lipschitz: shape.lipschitz().max(1.0),
            shape,
        }
    }

    /// Parametric interval of the ray inside the bounding sphere.
    fn bound_interval(&self, origin: Vec3, dir: Vec3) -> Option<(f64, f64)> {
        let b = origin.dot(dir);
        let c = origin.dot(origin) - self.bound * self.bound;
        let disc = b * b - c;
        if disc < 0.0 {
            return None;
        }
        let s = disc.sqrt();
        let (t0, t1) = (-b - s, -b + s);
        (t1 > 0.0).then_some((t0.max(0.0), t1))
    }

    fn march(&self, origin: Vec3, dir: Vec3, t_max: f64) -> Option<f64> {
        let (mut t, t1) = self.bound_interval(origin, dir)?;
        let t1 = t1.min(t_max);
        for _ in 0..MAX_STEPS {
            if t > t1 {
                return None;
            }
            let d = self.shape.sdf(origin + dir * t);
            if d < HIT_EPS {
                return Some(t);
            }
            t += d / self.lipschitz;
        }
        None
    }

    /// First surface hit along a unit-direction ray.
    pub fn trace(&self, origin: Vec3, dir: Vec3) -> Option<Hit> {
        let t = self.march(origin, dir, f64::INFINITY)?;
        let point = origin + dir * t;
        Some(Hit {
            t,
            point,
            normal: self.shape.normal(point),
        })
    }

    pub fn occluded(&self, origin: Vec3, dir: Vec3, max_t: f64) -> bool {
        self.march(origin, dir, max_t).is_some()
    }
}

/// A rendered view together with its per-pixel object coverage (0 to 4 subsamples).
#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub image: ImageTensor,
    pub coverage: Vec<u8>,
}

impl RenderOutput {
    /// Pixels whose majority of subsamples hit the object.
    pub fn mask(&self) -> Vec<bool> {
        self.coverage.iter().map(|&c| c as usize * 2 >= SUBSAMPLES.len()).collect()
    }

    /// Coverage-weighted object area in pixels.
    pub fn covered_area(&self) -> f64 {
        self.coverage.iter().map(|&c| c as f64).sum::<f64>() / SUBSAMPLES.len() as f64
    }
}

fn shade(scene: &SceneSpec, sky: &Sky, tracer: &Tracer, hit: &Hit, view_dir: Vec3, mode: ShadingMode) -> [f64; 3] {
    let n = hit.normal;
    let albedo = match mode {
        ShadingMode::Glossy => scene.glossy_material.base_color,
        ShadingMode::Diffuse => [1.0; 3],
    };
    let ambient = sky.radiance(n);
    let mut diffuse: [f64; 3] = std::array::from_fn(|i| scene.ambient * ambient[i]);
    let mut specular = [0.0; 3];
    let origin = hit.point + n * 2e-3;
    let m = &scene.glossy_material;
    for light in &scene.lights {
        let (l, dist, radiance) = match light {
            Light::Directional { direction, intensity } => (direction.normalized(), f64::INFINITY, *intensity),
            Light::Point { position, intensity } => {
                let d = *position - hit.point;
                let r2 = d.dot(d);
                (d.normalized(), r2.sqrt(), intensity.map(|e| e / r2))
            }
        };
        let ndl = n.dot(l);
        if ndl <= 0.0 || tracer.occluded(origin, l, dist) {
            continue;
        }
        for i in 0..3 {
            diffuse[i] += radiance[i] * ndl;
        }
        if mode == ShadingMode::Glossy {
            let h = (l - view_dir).normalized();
            let s = m.specular_strength * n.dot(h).max(0.0).powf(m.shininess());
            for i in 0..3 {
                specular[i] += radiance[i] * s * m.base_color[i];
            }
        }
    }
    std::array::from_fn(|i| albedo[i] * diffuse[i] + specular[i])
}

fn check_resolution(resolution: usize) -> Result<()> {
    if resolution == 0 {
        return Err(Error::Argument("resolution must be positive".into()));
    }
    Ok(())
}

/// Square `resolution`-sized render of one view.
pub fn render_view(scene: &SceneSpec, camera: &CameraPose, mode: ShadingMode, resolution: usize) -> Result<ImageTensor> {
    Ok(render_with_coverage(scene, camera, mode, resolution)?.image)
}

pub fn render_with_coverage(
    scene: &SceneSpec,
    camera: &CameraPose,
    mode: ShadingMode,
    resolution: usize,
) -> Result<RenderOutput> {
    check_resolution(resolution)?;
    let tracer = Tracer::new(scene);
    render_frame(scene, &tracer, &camera.frame(resolution, resolution), mode, resolution)
}

fn render_frame(
    scene: &SceneSpec,
    tracer: &Tracer,
    frame: &CameraFrame,
    mode: ShadingMode,
    resolution: usize,
) -> Result<RenderOutput> {
    let sky = scene.sky();
    let mut image = ImageTensor::filled(resolution, resolution, [0.0; 3]);
    let mut coverage = vec![0u8; resolution * resolution];
    for y in 0..resolution {
        for x in 0..resolution {
            let mut acc = [0.0; 3];
            for (dx, dy) in SUBSAMPLES {
                let dir = frame.ray(x as f64 + dx, y as f64 + dy);
                let c = match tracer.trace(frame.origin, dir) {
                    Some(hit) => {
                        coverage[y * resolution + x] += 1;
                        shade(scene, &sky, tracer, &hit, dir, mode)
                    }
                    None => sky.radiance(dir),
                };
                for i in 0..3 {
                    acc[i] += c[i];
                }
            }
            let px = acc.map(|v| ((v / SUBSAMPLES.len() as f64).clamp(0.0, 1.0) * 2.0 - 1.0) as f32);
            image.set_pixel(x, y, px);
        }
    }
    Ok(RenderOutput { image, coverage })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::geometry::GeometrySpec;
    use crate::datagen::scene::{sample_scene, DatagenConfig};

    fn plain_sphere(radius: f64) -> SceneSpec {
        let mut s = sample_scene(3, &DatagenConfig::default()).unwrap();
        s.geometry = GeometrySpec::Sphere { radius, detail: None };
        s
    }

    #[test]
    fn sphere_silhouette_matches_projected_disk() {
        let (r, d, fov, res) = (0.9, 3.6, 40.0f64, 64usize);
        let scene = plain_sphere(r);
        let cam = CameraPose::orbit(Vec3::ZERO, d, 0.3, 0.4, fov);
        let out = render_with_coverage(&scene, &cam, ShadingMode::Diffuse, res).unwrap();
        let alpha = (r / d).asin();
        let radius_px = alpha.tan() / (fov.to_radians() / 2.0).tan() * res as f64 / 2.0;
        let analytic = std::f64::consts::PI * radius_px * radius_px;
        let rel = (out.covered_area() - analytic).abs() / analytic;
        assert!(rel < 0.02, "relative area error {rel}");
    }

    #[test]
    fn masks_agree_between_modes() {
        let scene = sample_scene(11, &DatagenConfig::default()).unwrap();
        let cam = CameraPose::orbit(Vec3::ZERO, 3.5, 1.0, 0.5, 40.0);
        let g = render_with_coverage(&scene, &cam, ShadingMode::Glossy, 32).unwrap();
        let d = render_with_coverage(&scene, &cam, ShadingMode::Diffuse, 32).unwrap();
        assert_eq!(g.coverage, d.coverage);
        assert!(g.image.is_normalized() && d.image.is_normalized());
    }

    #[test]
    fn no_specular_white_base_matches_diffuse() {
        let mut scene = sample_scene(5, &DatagenConfig::default()).unwrap();
        scene.glossy_material.specular_strength = 0.0;
        scene.glossy_material.base_color = [1.0; 3];
        let cam = CameraPose::orbit(Vec3::ZERO, 3.5, 0.2, 0.5, 40.0);
        let g = render_view(&scene, &cam, ShadingMode::Glossy, 32).unwrap();
        let d = render_view(&scene, &cam, ShadingMode::Diffuse, 32).unwrap();
        assert_eq!(g.data(), d.data());
    }
}
