//! Scene descriptions and their seeded sampler.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::camera::CameraConfig;
use super::geometry::{GeometryRanges, GeometrySpec, ShapeRegistry, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub base_color: [f64; 3],
    pub roughness: f64,
    pub specular_strength: f64,
}

impl Material {
    /// Blinn-Phong exponent matching the roughness (`2 / r^2 - 2`).
    pub fn shininess(&self) -> f64 {
        (2.0 / (self.roughness * self.roughness) - 2.0).max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Light {
    /// `direction` points from the scene toward the light.
    Directional { direction: Vec3, intensity: [f64; 3] },
    /// Inverse-square falloff from `position`.
    Point { position: Vec3, intensity: [f64; 3] },
}

/// Vertical three-band gradient: ground below, horizon at eye level, zenith above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sky {
    pub ground: [f64; 3],
    pub horizon: [f64; 3],
    pub zenith: [f64; 3],
}

impl Sky {
    pub fn from_seed(env_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(env_seed);
        let mut tone = |lo: f64, hi: f64, tint: [f64; 3]| {
            let base = rng.gen_range(lo..hi);
            let jitter: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-0.06..0.06));
            std::array::from_fn(|i| (base * tint[i] + jitter[i]).clamp(0.0, 1.0))
        };
        let ground = tone(0.15, 0.35, [1.0, 0.95, 0.85]);
        let horizon = tone(0.55, 0.8, [1.0, 1.0, 1.0]);
        let zenith = tone(0.35, 0.6, [0.8, 0.9, 1.1]);
        Self { ground, horizon, zenith }
    }

    pub fn radiance(&self, dir: Vec3) -> [f64; 3] {
        let y = dir.y.clamp(-1.0, 1.0);
        let (a, b, t) = if y < 0.0 {
            (&self.horizon, &self.ground, (-y).sqrt())
        } else {
            (&self.horizon, &self.zenith, y.sqrt())
        };
        std::array::from_fn(|i| a[i] + (b[i] - a[i]) * t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub scene_id: u64,
    pub geometry: GeometrySpec,
    pub glossy_material: Material,
    pub lights: Vec<Light>,
    /// Scale of the sky-colored ambient term.
    pub ambient: f64,
    pub env_seed: u64,
    pub rng_seed: u64,
}

impl SceneSpec {
    pub fn sky(&self) -> Sky {
        Sky::from_seed(self.env_seed)
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo <= hi) {
        return Err(Error::Config(format!("{name} range min {lo} > max {hi}")));
    }
    Ok(())
}

/// Every tunable of the procedural dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatagenConfig {
    pub seed: u64,
    pub n_scenes: usize,
    pub n_views: usize,
    /// Square image side in pixels.
    pub resolution: usize,
    pub shapes: Vec<String>,
    pub geometry: GeometryRanges,
    /// Multiplier on object size; values well below 1 give objects too small to correspond.
    pub object_scale: f64,
    pub roughness: (f64, f64),
    pub specular_strength: (f64, f64),
    pub color_jitter: f64,
    pub light_count: (usize, usize),
    /// Summed irradiance of all lights at the scene center.
    pub light_total: (f64, f64),
    pub ambient: (f64, f64),
    pub camera: CameraConfig,
    /// Ground-truth correspondences sampled per triplet (upper bound).
    pub gt_per_triplet: usize,
    /// Triplets with fewer correspondences are left out of the manifest.
    pub min_corr: usize,
    /// Side of the correspondence patches; `None` means half the resolution.
    pub patch_size: Option<usize>,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_scenes: 20,
            n_views: 5,
            resolution: 64,
            shapes: ShapeRegistry::default().names().into_iter().map(String::from).collect(),
            geometry: GeometryRanges::default(),
            object_scale: 1.0,
            roughness: (0.05, 0.6),
            specular_strength: (0.3, 1.0),
            color_jitter: 0.08,
            light_count: (1, 3),
            light_total: (0.75, 0.95),
            ambient: (0.15, 0.25),
            camera: CameraConfig::default(),
            gt_per_triplet: 100,
            min_corr: crate::correspond::MIN_TRIPLET_CORRESPONDENCES,
            patch_size: None,
        }
    }
}

impl DatagenConfig {
    pub fn patch_size(&self) -> usize {
        self.patch_size.unwrap_or(self.resolution / 2)
    }

    pub fn validate(&self) -> Result<()> {
        check_range("roughness", self.roughness)?;
        check_range("specular_strength", self.specular_strength)?;
        check_range("light_total", self.light_total)?;
        check_range("ambient", self.ambient)?;
        check_range("geometry size", self.geometry.size)?;
        check_range("geometry detail", self.geometry.detail)?;
        check_range("bump amplitude", self.geometry.bump_amplitude)?;
        check_range("bump frequency", self.geometry.bump_frequency)?;
        if self.roughness.0 <= 0.0 {
            return Err(Error::Config("roughness must be positive".into()));
        }
        if self.light_count.0 == 0 || self.light_count.0 > self.light_count.1 {
            return Err(Error::Config(format!("invalid light count range {:?}", self.light_count)));
        }
        if self.shapes.is_empty() {
            return Err(Error::Config("no shape kinds enabled".into()));
        }
        let registry = ShapeRegistry::default();
        for s in &self.shapes {
            if !registry.names().contains(&s.as_str()) {
                return Err(Error::Config(format!("unknown shape kind `{s}`")));
            }
        }
        if self.n_views < 3 {
            return Err(Error::Config(format!("n_views must be >= 3, got {}", self.n_views)));
        }
        if self.resolution < 16 {
            return Err(Error::Config(format!("resolution {} too small", self.resolution)));
        }
        let p = self.patch_size();
        if p == 0 || p > self.resolution {
            return Err(Error::Config(format!("patch size {p} incompatible with resolution {}", self.resolution)));
        }
        if !(self.object_scale > 0.0) {
            return Err(Error::Config("object_scale must be positive".into()));
        }
        self.camera.validate()
    }
}

/// Draws every stochastic scene field from the configured ranges.
pub fn sample_scene(rng_seed: u64, config: &DatagenConfig) -> Result<SceneSpec> {
    sample_scene_with_id(0, rng_seed, config)
}

pub fn sample_scene_with_id(scene_id: u64, rng_seed: u64, config: &DatagenConfig) -> Result<SceneSpec> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let kind = &config.shapes[rng.gen_range(0..config.shapes.len())];
    let geometry = ShapeRegistry::default()
        .sample(kind, &mut rng, &config.geometry)?
        .scaled(config.object_scale);

    const METALS: [[f64; 3]; 3] = [[0.95, 0.64, 0.54], [0.95, 0.93, 0.88], [1.0, 0.78, 0.34]];
    let metal = METALS[rng.gen_range(0..METALS.len())];
    let j = config.color_jitter;
    let base_color = std::array::from_fn(|i| (metal[i] + rng.gen_range(-j..=j)).clamp(0.0, 1.0));
    let glossy_material = Material {
        base_color,
        roughness: rng.gen_range(config.roughness.0..=config.roughness.1),
        specular_strength: rng.gen_range(config.specular_strength.0..=config.specular_strength.1),
    };

    let n_lights = rng.gen_range(config.light_count.0..=config.light_count.1);
    let total = rng.gen_range(config.light_total.0..=config.light_total.1);
    // the key light takes at least half of the budget
    let mut shares: Vec<f64> = (0..n_lights).map(|i| if i == 0 { rng.gen_range(1.0..2.0) } else { rng.gen_range(0.3..0.6) }).collect();
    let sum: f64 = shares.iter().sum();
    shares.iter_mut().for_each(|s| *s *= total / sum);
    let mut lights = Vec::with_capacity(n_lights);
    for (i, share) in shares.into_iter().enumerate() {
        let tint: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.92..=1.0));
        let intensity = tint.map(|t| t * share);
        if i == 0 {
            let az = rng.gen_range(0.0..std::f64::consts::TAU);
            let el = rng.gen_range(30f64..70.0).to_radians();
            let direction = Vec3::new(el.cos() * az.sin(), el.sin(), el.cos() * az.cos());
            lights.push(Light::Directional { direction, intensity });
        } else {
            let position = Vec3::new(rng.gen_range(-1.5..1.5), rng.gen_range(2.5..3.5), rng.gen_range(-1.5..1.5));
            let d2 = position.dot(position);
            lights.push(Light::Point {
                position,
                intensity: intensity.map(|e| e * d2),
            });
        }
    }

    Ok(SceneSpec {
        scene_id,
        geometry,
        glossy_material,
        lights,
        ambient: rng.gen_range(config.ambient.0..=config.ambient.1),
        env_seed: rng.gen(),
        rng_seed,
    })
}
