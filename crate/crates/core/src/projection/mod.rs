//! Vertical sampling, camera projection and the masked aggregation kernel.

mod aggregate;
mod camera;
mod sampling;

pub use aggregate::{aggregate, bilinear_sample, BevQueryGrid, ImageFeatureMap, SamplingOffsets};
pub use camera::{CameraFile, CameraModel, Projection};
pub use sampling::{
    sample_height_guided, sample_uniform, validity_mask, ReferencePointSet, SamplingConfig,
    ValidityMask, DEFAULT_N_Z,
};
