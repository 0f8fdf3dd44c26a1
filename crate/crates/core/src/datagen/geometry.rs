//! Vector math and signed-distance shapes.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const UP: Vec3 = Vec3 { x: 0.0, y: 1.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn length(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.length())
    }

    pub fn hadamard(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Smooth scalar field on directions: a seeded sum of plane waves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpField {
    pub amplitude: f64,
    pub waves: Vec<Wave>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub direction: Vec3,
    pub frequency: f64,
    pub phase: f64,
    pub weight: f64,
}

impl BumpField {
    pub fn sample(rng: &mut ChaCha8Rng, amplitude: f64, count: usize, freq: (f64, f64)) -> Self {
        let waves = (0..count)
            .map(|_| {
                let direction = loop {
                    let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    let l = v.length();
                    if l > 0.1 && l <= 1.0 {
                        break v * (1.0 / l);
                    }
                };
                Wave {
                    direction,
                    frequency: rng.gen_range(freq.0..=freq.1),
                    phase: rng.gen_range(0.0..std::f64::consts::TAU),
                    weight: rng.gen_range(0.5..1.0),
                }
            })
            .collect::<Vec<_>>();
        Self { amplitude, waves }
    }

    /// Normalized so the field stays within `[-amplitude, amplitude]`.
    pub fn eval(&self, p: Vec3) -> f64 {
        let total: f64 = self.waves.iter().map(|w| w.weight).sum();
        if total == 0.0 {
            return 0.0;
        }
        let s: f64 = self
            .waves
            .iter()
            .map(|w| w.weight * (w.frequency * w.direction.dot(p) + w.phase).sin())
            .sum();
        self.amplitude * s / total
    }

    /// Upper bound on the field's gradient magnitude.
    pub fn lipschitz(&self) -> f64 {
        let total: f64 = self.waves.iter().map(|w| w.weight).sum();
        if total == 0.0 {
            return 0.0;
        }
        self.amplitude * self.waves.iter().map(|w| w.weight * w.frequency).sum::<f64>() / total
    }
}

/// A closed surface given by a signed distance bound, centered at the origin.
pub trait Shape: Send + Sync {
    fn name(&self) -> &'static str;

    /// Negative inside; `|sdf| / lipschitz()` never overshoots the surface.
    fn sdf(&self, p: Vec3) -> f64;

    fn lipschitz(&self) -> f64 {
        1.0
    }

    /// Radius of a sphere enclosing the surface.
    fn bound_radius(&self) -> f64;

    fn normal(&self, p: Vec3) -> Vec3 {
        let e = 1e-5;
        let dx = self.sdf(p + Vec3::new(e, 0.0, 0.0)) - self.sdf(p - Vec3::new(e, 0.0, 0.0));
        let dy = self.sdf(p + Vec3::new(0.0, e, 0.0)) - self.sdf(p - Vec3::new(0.0, e, 0.0));
        let dz = self.sdf(p + Vec3::new(0.0, 0.0, e)) - self.sdf(p - Vec3::new(0.0, 0.0, e));
        Vec3::new(dx, dy, dz).normalized()
    }
}

struct Sphere {
    radius: f64,
}

impl Shape for Sphere {
    fn name(&self) -> &'static str {
        "sphere"
    }
    fn sdf(&self, p: Vec3) -> f64 {
        p.length() - self.radius
    }
    fn bound_radius(&self) -> f64 {
        self.radius
    }
    fn normal(&self, p: Vec3) -> Vec3 {
        p.normalized()
    }
}

/// Torus in the xz-plane, tilted about the x axis.
struct Torus {
    major: f64,
    minor: f64,
    tilt: f64,
}

impl Shape for Torus {
    fn name(&self) -> &'static str {
        "torus"
    }
    fn sdf(&self, p: Vec3) -> f64 {
        let (s, c) = self.tilt.sin_cos();
        let q = Vec3::new(p.x, c * p.y - s * p.z, s * p.y + c * p.z);
        let ring = (q.x * q.x + q.z * q.z).sqrt() - self.major;
        (ring * ring + q.y * q.y).sqrt() - self.minor
    }
    fn bound_radius(&self) -> f64 {
        self.major + self.minor
    }
}

/// `|x/a|^e + |y/b|^e + |z/c|^e = 1`; the e-norm scaled by the smallest radius is 1-Lipschitz for e >= 2.
struct Superellipsoid {
    radii: Vec3,
    exponent: f64,
}

impl Shape for Superellipsoid {
    fn name(&self) -> &'static str {
        "superellipsoid"
    }
    fn sdf(&self, p: Vec3) -> f64 {
        let e = self.exponent;
        let f = (p.x / self.radii.x).abs().powf(e) + (p.y / self.radii.y).abs().powf(e) + (p.z / self.radii.z).abs().powf(e);
        let rmin = self.radii.x.min(self.radii.y).min(self.radii.z);
        (f.powf(1.0 / e) - 1.0) * rmin
    }
    fn bound_radius(&self) -> f64 {
        self.radii.length()
    }
}

/// Any base shape with a radial heightfield added to its distance.
struct Displaced {
    base: Box<dyn Shape>,
    bumps: BumpField,
    name: &'static str,
}

impl Shape for Displaced {
    fn name(&self) -> &'static str {
        self.name
    }
    fn sdf(&self, p: Vec3) -> f64 {
        self.base.sdf(p) - self.bumps.eval(p)
    }
    fn lipschitz(&self) -> f64 {
        self.base.lipschitz() + self.bumps.lipschitz()
    }
    fn bound_radius(&self) -> f64 {
        self.base.bound_radius() + self.bumps.amplitude
    }
}

/// Serializable description of a scene's object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeometrySpec {
    Sphere { radius: f64, detail: Option<BumpField> },
    Torus { major: f64, minor: f64, tilt: f64, detail: Option<BumpField> },
    Superellipsoid { radii: Vec3, exponent: f64, detail: Option<BumpField> },
    BumpySphere { radius: f64, bumps: BumpField },
}

impl GeometrySpec {
    pub fn kind(&self) -> &'static str {
        match self {
            GeometrySpec::Sphere { .. } => "sphere",
            GeometrySpec::Torus { .. } => "torus",
            GeometrySpec::Superellipsoid { .. } => "superellipsoid",
            GeometrySpec::BumpySphere { .. } => "bumpy-sphere",
        }
    }

    pub fn build(&self) -> Box<dyn Shape> {
        fn wrap(base: Box<dyn Shape>, detail: &Option<BumpField>) -> Box<dyn Shape> {
            match detail {
                Some(b) if b.amplitude > 0.0 => {
                    let name = base.name();
                    Box::new(Displaced { base, bumps: b.clone(), name })
                }
                _ => base,
            }
        }
        match self {
            GeometrySpec::Sphere { radius, detail } => wrap(Box::new(Sphere { radius: *radius }), detail),
            GeometrySpec::Torus { major, minor, tilt, detail } => wrap(
                Box::new(Torus {
                    major: *major,
                    minor: *minor,
                    tilt: *tilt,
                }),
                detail,
            ),
            GeometrySpec::Superellipsoid { radii, exponent, detail } => wrap(
                Box::new(Superellipsoid {
                    radii: *radii,
                    exponent: *exponent,
                }),
                detail,
            ),
            GeometrySpec::BumpySphere { radius, bumps } => Box::new(Displaced {
                base: Box::new(Sphere { radius: *radius }),
                bumps: bumps.clone(),
                name: "bumpy-sphere",
            }),
        }
    }

    /// Uniformly rescales every size parameter.
    pub fn scaled(&self, s: f64) -> GeometrySpec {
        let scale_bumps = |b: &BumpField| BumpField {
            amplitude: b.amplitude * s,
            waves: b
                .waves
                .iter()
                .map(|w| Wave {
                    frequency: w.frequency / s,
                    ..w.clone()
                })
                .collect(),
        };
        match self {
            GeometrySpec::Sphere { radius, detail } => GeometrySpec::Sphere {
                radius: radius * s,
                detail: detail.as_ref().map(scale_bumps),
            },
            GeometrySpec::Torus { major, minor, tilt, detail } => GeometrySpec::Torus {
                major: major * s,
                minor: minor * s,
                tilt: *tilt,
                detail: detail.as_ref().map(scale_bumps),
            },
            GeometrySpec::Superellipsoid { radii, exponent, detail } => GeometrySpec::Superellipsoid {
                radii: *radii * s,
                exponent: *exponent,
                detail: detail.as_ref().map(scale_bumps),
            },
            GeometrySpec::BumpySphere { radius, bumps } => GeometrySpec::BumpySphere {
                radius: radius * s,
                bumps: scale_bumps(bumps),
            },
        }
    }
}

/// Parameters shared by the geometry samplers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryRanges {
    /// Overall object size in world units.
    pub size: (f64, f64),
    /// Amplitude of the surface detail added to every shape, relative to size.
    pub detail: (f64, f64),
    /// Amplitude of the bumpy sphere's displacement, relative to its radius.
    pub bump_amplitude: (f64, f64),
    pub bump_frequency: (f64, f64),
}

impl Default for GeometryRanges {
    fn default() -> Self {
        Self {
            size: (0.75, 0.95),
            detail: (0.04, 0.06),
            bump_amplitude: (0.05, 0.09),
            bump_frequency: (5.0, 10.0),
        }
    }
}

type GeometrySampler = fn(&mut ChaCha8Rng, &GeometryRanges) -> GeometrySpec;

fn detail(rng: &mut ChaCha8Rng, r: &GeometryRanges, size: f64) -> Option<BumpField> {
    let amp = rng.gen_range(r.detail.0..=r.detail.1) * size;
    let f = (r.bump_frequency.0 / size * 1.5, r.bump_frequency.1 / size * 1.5);
    Some(BumpField::sample(rng, amp, 12, f))
}

/// Shape kinds selectable by name.
pub struct ShapeRegistry {
    samplers: BTreeMap<&'static str, GeometrySampler>,
}

impl Default for ShapeRegistry {
    fn default() -> Self {
        let mut r = Self {
            samplers: BTreeMap::new(),
        };
        r.register("sphere", |rng, ranges| {
            let radius = rng.gen_range(ranges.size.0..=ranges.size.1);
            GeometrySpec::Sphere {
                radius,
                detail: detail(rng, ranges, radius),
            }
        });
        r.register("torus", |rng, ranges| {
            let size = rng.gen_range(ranges.size.0..=ranges.size.1);
            let minor = size * rng.gen_range(0.3..0.42);
            GeometrySpec::Torus {
                major: size - minor,
                minor,
                tilt: rng.gen_range(0.5..1.1),
                detail: detail(rng, ranges, size),
            }
        });
        r.register("superellipsoid", |rng, ranges| {
            let size = rng.gen_range(ranges.size.0..=ranges.size.1);
            let radii = Vec3::new(
                size * rng.gen_range(0.75..=1.0),
                size * rng.gen_range(0.75..=1.0),
                size * rng.gen_range(0.75..=1.0),
            );
            GeometrySpec::Superellipsoid {
                radii,
                exponent: rng.gen_range(2.5..4.0),
                detail: detail(rng, ranges, size),
            }
        });
        r.register("bumpy-sphere", |rng, ranges| {
            let radius = rng.gen_range(ranges.size.0..=ranges.size.1);
            let amp = rng.gen_range(ranges.bump_amplitude.0..=ranges.bump_amplitude.1) * radius;
            let f = (ranges.bump_frequency.0 / radius, ranges.bump_frequency.1 / radius);
            GeometrySpec::BumpySphere {
                radius,
                bumps: BumpField::sample(rng, amp, 16, f),
            }
        });
        r
    }
}

impl ShapeRegistry {
    pub fn register(&mut self, name: &'static str, sampler: GeometrySampler) {
        self.samplers.insert(name, sampler);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.samplers.keys().copied().collect()
    }

    pub fn sample(&self, name: &str, rng: &mut ChaCha8Rng, ranges: &GeometryRanges) -> Result<GeometrySpec> {
        let sampler = self.samplers.get(name).ok_or_else(|| {
            Error::Config(format!("unknown shape kind `{name}` (known: {})", self.names().join(", ")))
        })?;
        Ok(sampler(rng, ranges))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn sphere_sdf_is_exact() {
        let s = GeometrySpec::Sphere { radius: 1.0, detail: None }.build();
        assert!((s.sdf(Vec3::new(0.0, 2.0, 0.0)) - 1.0).abs() < 1e-12);
        let n = s.normal(Vec3::new(0.0, 0.0, 1.0));
        assert!((n.z - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bump_field_respects_amplitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = BumpField::sample(&mut rng, 0.1, 16, (4.0, 8.0));
        for i in 0..200 {
            let p = Vec3::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos(), i as f64 * 0.01);
            assert!(b.eval(p).abs() <= 0.1 + 1e-12);
        }
    }

    #[test]
    fn registry_samples_every_kind() {
        let reg = ShapeRegistry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for name in reg.names() {
            let g = reg.sample(name, &mut rng, &GeometryRanges::default()).unwrap();
            assert_eq!(g.kind(), name);
            let shape = g.build();
            let inside = match &g {
                GeometrySpec::Torus { major, .. } => Vec3::new(*major, 0.0, 0.0),
                _ => Vec3::ZERO,
            };
            assert!(shape.sdf(inside) < 0.0, "{name} core point should be inside");
            let far = Vec3::new(0.0, 0.0, shape.bound_radius() + 0.01);
            assert!(shape.sdf(far) > 0.0, "{name} bound radius too small");
        }
        assert!(reg.sample("teapot", &mut rng, &GeometryRanges::default()).is_err());
    }
}
