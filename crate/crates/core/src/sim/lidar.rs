use std::path::Path;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::scene::{raycast_scene, SceneSpec};
use crate::error::{Error, Result};
use crate::grid::PointCloud;
use crate::hash::hash_counters;
use crate::par;

/// Spinning-LiDAR ray pattern. Angles are in radians; both ranges are
/// inclusive and sampled evenly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LidarSpec {
    pub origin: [f64; 3],
    pub azimuth_range: [f64; 2],
    pub azimuth_count: usize,
    pub elevation_range: [f64; 2],
    pub elevation_count: usize,
    pub max_range: f64,
    #[serde(default)]
    pub noise_sigma_z: f64,
    #[serde(default)]
    pub dropout_prob: f64,
    #[serde(default)]
    pub seed: u64,
}

fn even(range: [f64; 2], n: usize, k: usize) -> f64 {
    if n == 1 {
        return 0.5 * (range[0] + range[1]);
    }
    let a = k as f64 / (n - 1) as f64;
    (1.0 - a) * range[0] + a * range[1]
}

impl LidarSpec {
    pub fn validate(&self) -> Result<()> {
        if self.azimuth_count == 0 || self.elevation_count == 0 {
            return Err(Error::Config("ray counts must be at least 1".into()));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(Error::Config(format!("max_range {} must be positive", self.max_range)));
        }
        if !(0.0..=1.0).contains(&self.dropout_prob) {
            return Err(Error::Config(format!("dropout_prob {} outside [0, 1]", self.dropout_prob)));
        }
        if !(self.noise_sigma_z >= 0.0 && self.noise_sigma_z.is_finite()) {
            return Err(Error::Config("noise_sigma_z must be non-negative".into()));
        }
        let finite = self
            .origin
            .iter()
            .chain(&self.azimuth_range)
            .chain(&self.elevation_range)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("origin and angle ranges must be finite".into()));
        }
        Ok(())
    }

    pub fn ray_count(&self) -> usize {
        self.azimuth_count * self.elevation_count
    }

    /// Unit direction of ray `r`; rays are azimuth-major.
    pub fn direction(&self, r: usize) -> Vector3<f64> {
        let az = even(self.azimuth_range, self.azimuth_count, r / self.elevation_count);
        let el = even(self.elevation_range, self.elevation_count, r % self.elevation_count);
        Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("lidar spec serialises")
    }
}

/// Casts every ray of `lidar` into `scene`.
///
/// Each ray owns a generator keyed on `(seed, ray index)`, so the cloud does
/// not depend on thread count or scheduling.
pub fn simulate_lidar(scene: &SceneSpec, lidar: &LidarSpec) -> Result<PointCloud> {
    scene.validate()?;
    lidar.validate()?;
    let origin = Point3::from(lidar.origin);
    let hits = par::map_range(lidar.ray_count(), |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(hash_counters(lidar.seed, &[r as u64]));
        let dropped = rng.random::<f64>() < lidar.dropout_prob;
        let noise: f64 = rng.sample(StandardNormal);
        if dropped {
            return None;
        }
        let hit = raycast_scene(scene, &origin, &lidar.direction(r), lidar.max_range)?;
        let mut p = hit.point;
        p.z += lidar.noise_sigma_z * noise;
        Some(p)
    });
    PointCloud::new(hits.into_iter().flatten().collect())
}
