//! File formats: binary grids and point clouds, CSV tables.

mod binary;
mod table;

pub use binary::{
    decode_heightmap, decode_points, decode_voxels, encode_heightmap, encode_points, encode_voxels, read_heightmap,
    read_points, read_voxels, write_heightmap, write_points, write_voxels, HEADER_LEN, HEIGHTMAP_MAGIC,
    INVALID_BITS, POINTS_MAGIC, VERSION, VOXELS_MAGIC,
};
pub use table::{
    project_rows, read_csv, reference_rows, write_csv, write_csv_to, ProjectionRow, ReferenceRow,
};
