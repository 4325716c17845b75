//! The fixed desk-scale scene: a 1.8 m tall vehicle-sized box on flat ground,
//! an overhead camera and a roof-mounted spinning LiDAR.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Point3};

use super::lidar::LidarSpec;
use super::scene::{Ground, SceneObject, SceneSpec};
use crate::grid::VoxelGridSpec;
use crate::projection::CameraModel;

pub const GROUND_CLASS: u8 = 0;
pub const VEHICLE_CLASS: u8 = 1;
pub const VEHICLE_HEIGHT: f64 = 1.8;

pub fn grid() -> VoxelGridSpec {
    VoxelGridSpec::occ3d()
}

pub fn scene() -> SceneSpec {
    SceneSpec {
        ground: Some(Ground {
            z_top: 0.0,
            class: GROUND_CLASS,
        }),
        objects: vec![SceneObject {
            center: [10.0, 0.0, VEHICLE_HEIGHT / 2.0],
            size: [4.5, 1.8, VEHICLE_HEIGHT],
            yaw: 0.0,
            class: VEHICLE_CLASS,
        }],
    }
}

/// Nadir camera 1.2 m above the roof. The two upper uniform samples of every
/// footprint pillar (3.27 m and 5.4 m) lie above the camera and fall out of
/// view.
pub fn camera() -> CameraModel {
    let r = Matrix3::new(0.0, -1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, -1.0);
    CameraModel::looking_from(200.0, 200.0, 500.0, 500.0, 1000, 1000, r, Point3::new(10.0, 0.0, 3.0))
        .expect("canonical camera is valid")
}

pub fn lidar(noise_sigma_z: f64, seed: u64) -> LidarSpec {
    let n_az = 1800;
    LidarSpec {
        origin: [0.0, 0.0, 2.0],
        azimuth_range: [-PI, PI - 2.0 * PI / n_az as f64],
        azimuth_count: n_az,
        elevation_range: [-30f64.to_radians(), 5f64.to_radians()],
        elevation_count: 64,
        max_range: 60.0,
        noise_sigma_z,
        dropout_prob: 0.0,
        seed,
    }
}
