//! Geometric core of height-guided BEV projection.
//!
//! LiDAR point clouds are collapsed into per-pillar height maps, which bound
//! the vertical range of the reference points projected into camera images.
//! Around that sit the training-time height mixing schedule, a deterministic
//! feature aggregation kernel, occupancy metrics and a small scene simulator.
//!
//! Kernels run data-parallel on rayon with the default `parallel` feature and
//! sequentially without it; results are identical either way.

pub mod error;
pub mod grid;
pub mod hash;
pub mod heightmap;
pub mod io;
pub mod metrics;
pub mod par;
pub mod phc;
pub mod projection;
pub mod sim;

pub use error::{Error, Result};
pub use grid::{Axis, PointCloud, VoxelGridSpec, VoxelIndex};
pub use heightmap::{
    build_occupancy, collapse_height, heightmap_from_points, heightmap_from_semantic, BinaryOccupancyGrid,
    HeightMap, SemanticVoxelGrid, DEFAULT_NUM_CLASSES, FREE_CLASS,
};
