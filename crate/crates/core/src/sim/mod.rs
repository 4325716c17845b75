//! Synthetic scenes, LiDAR simulation and the geometric experiments run on them.

pub mod canonical;
mod experiments;
mod lidar;
mod scene;

pub use experiments::{
    convex_hull, height_error_experiment, height_error_stats, hitrate_experiment, in_convex, HeightErrorStats,
    HistogramBin, HitRateResult, HitRecord, SamplingMode,
};
pub use lidar::{simulate_lidar, LidarSpec};
pub use scene::{raycast_scene, rasterize_gt, surface_distance, Ground, SceneHit, SceneObject, SceneSpec};
