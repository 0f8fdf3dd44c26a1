//! Pinhole cameras on the upper hemisphere and seeded camera arcs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geometry::Vec3;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    /// Vertical (and, for square images, horizontal) field of view in degrees.
    pub field_of_view: f64,
}

/// Orthonormal camera frame with derived projection constants.
#[derive(Debug, Clone, Copy)]
pub struct CameraFrame {
    pub origin: Vec3,
    forward: Vec3,
    right: Vec3,
    up: Vec3,
    tan_half: f64,
    width: usize,
    height: usize,
}

impl CameraPose {
    /// Pose at `(azimuth, elevation)` in radians, `radius` away from `target`.
    ///
    /// Azimuth grows clockwise when the scene is seen from above (+y).
    pub fn orbit(target: Vec3, radius: f64, azimuth: f64, elevation: f64, field_of_view: f64) -> Self {
        let (se, ce) = elevation.sin_cos();
        let (sa, ca) = azimuth.sin_cos();
        let offset = Vec3::new(ce * sa, se, ce * ca) * radius;
        Self {
            position: target + offset,
            look_at: target,
            up: Vec3::UP,
            field_of_view,
        }
    }

    pub fn azimuth(&self) -> f64 {
        let d = self.position - self.look_at;
        d.x.atan2(d.z)
    }

    pub fn elevation(&self) -> f64 {
        let d = self.position - self.look_at;
        (d.y / d.length()).asin()
    }

    pub fn frame(&self, width: usize, height: usize) -> CameraFrame {
        let forward = (self.look_at - self.position).normalized();
        let right = forward.cross(self.up).normalized();
        let up = right.cross(forward);
        CameraFrame {
            origin: self.position,
            forward,
            right,
            up,
            tan_half: (self.field_of_view.to_radians() * 0.5).tan(),
            width,
            height,
        }
    }
}

impl CameraFrame {
    /// Unit ray direction through continuous pixel coordinates (x right, y down,
    /// integer values at pixel centers).
    pub fn ray(&self, px: f64, py: f64) -> Vec3 {
        let aspect = self.width as f64 / self.height as f64;
        let sx = ((px + 0.5) / self.width as f64 * 2.0 - 1.0) * self.tan_half * aspect;
        let sy = (1.0 - (py + 0.5) / self.height as f64 * 2.0) * self.tan_half;
        (self.forward + self.right * sx + self.up * sy).normalized()
    }

    /// Pixel coordinates of a world point, `None` when behind the camera.
    pub fn project(&self, p: Vec3) -> Option<(f64, f64)> {
        let d = p - self.origin;
        let z = d.dot(self.forward);
        if z <= 1e-9 {
            return None;
        }
        let aspect = self.width as f64 / self.height as f64;
        let sx = d.dot(self.right) / (z * self.tan_half * aspect);
        let sy = d.dot(self.up) / (z * self.tan_half);
        let px = (sx + 1.0) * 0.5 * self.width as f64 - 0.5;
        let py = (1.0 - sy) * 0.5 * self.height as f64 - 0.5;
        Some((px, py))
    }

    pub fn forward(&self) -> Vec3 {
        self.forward
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub distance: (f64, f64),
    /// Elevation band in degrees above the horizon.
    pub elevation: (f64, f64),
    /// Azimuth step between consecutive views, in degrees.
    pub azimuth_step: (f64, f64),
    pub field_of_view: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            distance: (3.4, 3.8),
            elevation: (15.0, 45.0),
            azimuth_step: (4.0, 7.0),
            field_of_view: 40.0,
        }
    }
}

impl CameraConfig {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("camera distance", self.distance),
            ("camera elevation", self.elevation),
            ("camera azimuth step", self.azimuth_step),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo <= hi) {
                return Err(Error::Config(format!("{name} range min {lo} > max {hi}")));
            }
        }
        if self.elevation.0 <= 0.0 || self.elevation.1 >= 90.0 {
            return Err(Error::Config("camera elevation must lie in (0, 90) degrees".into()));
        }
        if self.azimuth_step.0 <= 0.0 {
            return Err(Error::Config("azimuth step must be positive".into()));
        }
        if !(self.field_of_view > 0.0 && self.field_of_view < 180.0) {
            return Err(Error::Config(format!("field of view {} out of range", self.field_of_view)));
        }
        Ok(())
    }
}

/// `n_views` consecutive poses with strictly increasing azimuth and a shared
/// distance, each elevation within the configured band.
pub fn sample_camera_arc(rng_seed: u64, n_views: usize, config: &CameraConfig) -> Result<Vec<CameraPose>> {
    if n_views < 3 {
        return Err(Error::Argument(format!("a camera arc needs at least 3 views, got {n_views}")));
    }
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let distance = rng.gen_range(config.distance.0..=config.distance.1);
    let (e_lo, e_hi) = config.elevation;
    let mut elevation = rng.gen_range(e_lo..=e_hi);
    let mut azimuth = rng.gen_range(0.0..360.0f64);
    let mut poses = Vec::with_capacity(n_views);
    for i in 0..n_views {
        if i > 0 {
            azimuth += rng.gen_range(config.azimuth_step.0..=config.azimuth_step.1);
            elevation = (elevation + rng.gen_range(-1.0..=1.0)).clamp(e_lo, e_hi);
        }
        poses.push(CameraPose::orbit(
            Vec3::ZERO,
            distance,
            azimuth.to_radians(),
            elevation.to_radians(),
            config.field_of_view,
        ));
    }
    Ok(poses)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unwrap_angle(mut d: f64) -> f64 {
        while d <= -180.0 {
            d += 360.0;
        }
        while d > 180.0 {
            d -= 360.0;
        }
        d
    }

    #[test]
    fn project_inverts_ray() {
        let pose = CameraPose::orbit(Vec3::ZERO, 3.5, 0.7, 0.4, 40.0);
        let f = pose.frame(64, 64);
        for (px, py) in [(10.3, 50.1), (31.5, 31.5), (0.0, 63.0)] {
            let p = f.origin + f.ray(px, py) * 2.7;
            let (qx, qy) = f.project(p).unwrap();
            assert!((qx - px).abs() < 1e-9 && (qy - py).abs() < 1e-9);
        }
    }

    #[test]
    fn center_projects_to_image_center() {
        let pose = CameraPose::orbit(Vec3::ZERO, 3.5, 1.0, 0.3, 40.0);
        let (x, y) = pose.frame(64, 64).project(Vec3::ZERO).unwrap();
        assert!((x - 31.5).abs() < 1e-9 && (y - 31.5).abs() < 1e-9);
    }

    #[test]
    fn arc_is_monotone_and_above_horizon() {
        let poses = sample_camera_arc(1, 5, &CameraConfig::default()).unwrap();
        assert_eq!(poses.len(), 5);
        for w in poses.windows(2) {
            let step = unwrap_angle(w[1].azimuth().to_degrees() - w[0].azimuth().to_degrees());
            assert!(step > 0.0);
        }
        assert!(poses.iter().all(|p| p.position.y > 0.0 && p.elevation() > 0.0));
    }

    #[test]
    fn arc_gaps_within_step_range() {
        let cfg = CameraConfig::default();
        let poses = sample_camera_arc(2, 3, &cfg).unwrap();
        for w in poses.windows(2) {
            let step = unwrap_angle(w[1].azimuth().to_degrees() - w[0].azimuth().to_degrees());
            assert!(step >= cfg.azimuth_step.0 - 1e-9 && step <= cfg.azimuth_step.1 + 1e-9, "{step}");
        }
    }

    #[test]
    fn arc_argument_errors() {
        assert!(matches!(sample_camera_arc(1, 2, &CameraConfig::default()), Err(Error::Argument(_))));
        let bad = CameraConfig {
            distance: (4.0, 3.0),
            ..CameraConfig::default()
        };
        assert!(matches!(sample_camera_arc(1, 5, &bad), Err(Error::Config(_))));
    }
}
