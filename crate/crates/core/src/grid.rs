//! Spatial discretisation shared by every other module.
//!
//! Index linearisation is fixed crate-wide: BEV cell `i_x * Y + i_y`,
//! voxel `(i_x * Y + i_y) * Z + i_z`.

use std::path::Path;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `(max - min) / delta` being an integer.
const DIM_TOLERANCE: f64 = 1e-9;

/// One discretised axis: `n` half-open cells of width `delta` covering `[min, max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub delta: f64,
    pub n: usize,
}

impl Axis {
    fn new(name: &str, min: f64, max: f64, delta: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && delta.is_finite()) {
            return Err(Error::Config(format!("{name}: bounds must be finite")));
        }
        if min >= max {
            return Err(Error::Config(format!("{name}: min {min} must be < max {max}")));
        }
        if delta <= 0.0 {
            return Err(Error::Config(format!("{name}: resolution {delta} must be > 0")));
        }
        let q = (max - min) / delta;
        let n = q.round();
        if (q - n).abs() > DIM_TOLERANCE {
            return Err(Error::Config(format!(
                "{name}: extent {} is not a whole number of {delta} cells ({q})",
                max - min
            )));
        }
        if n < 1.0 {
            return Err(Error::Config(format!("{name}: no cells")));
        }
        Ok(Self {
            min,
            max,
            delta,
            n: n as usize,
        })
    }

    /// Lower boundary of cell `k` (also the upper boundary of cell `k - 1`).
    #[inline]
    pub fn boundary(&self, k: usize) -> f64 {
        self.min + k as f64 * self.delta
    }

    #[inline]
    pub fn center(&self, k: usize) -> f64 {
        self.min + (k as f64 + 0.5) * self.delta
    }

    /// Cell containing `v`, or `None` outside `[min, max)`.
    ///
    /// The floor quotient is nudged so that `boundary(i) <= v < boundary(i + 1)`
    /// holds in floating point, not only in exact arithmetic.
    #[inline]
    pub fn index(&self, v: f64) -> Option<usize> {
        if !(v >= self.min && v < self.max) {
            return None;
        }
        let mut i = ((v - self.min) / self.delta).floor().max(0.0) as usize;
        i = i.min(self.n - 1);
        while i > 0 && v < self.boundary(i) {
            i -= 1;
        }
        while i + 1 < self.n && v >= self.boundary(i + 1) {
            i += 1;
        }
        Some(i)
    }
}

/// The 3D region of interest with its horizontal and vertical resolution.
///
/// Dimensions are always derived from the bounds, never stored on disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelGridSpec {
    x: Axis,
    y: Axis,
    z: Axis,
}

/// On-disk JSON form of [`VoxelGridSpec`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoxelGridSpecFile {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub delta_xy: f64,
    pub delta_z: f64,
}

impl VoxelGridSpec {
    pub fn new(
        x: (f64, f64),
        y: (f64, f64),
        z: (f64, f64),
        delta_xy: f64,
        delta_z: f64,
    ) -> Result<Self> {
        Ok(Self {
            x: Axis::new("x", x.0, x.1, delta_xy)?,
            y: Axis::new("y", y.0, y.1, delta_xy)?,
            z: Axis::new("z", z.0, z.1, delta_z)?,
        })
    }

    /// The Occ3D-nuScenes grid: x, y in [-40, 40), z in [-1, 5.4), 0.4 m voxels.
    pub fn occ3d() -> Self {
        Self::new((-40.0, 40.0), (-40.0, 40.0), (-1.0, 5.4), 0.4, 0.4)
            .expect("occ3d grid is valid")
    }

    pub fn from_file(f: &VoxelGridSpecFile) -> Result<Self> {
        Self::new(
            (f.x_min, f.x_max),
            (f.y_min, f.y_max),
            (f.z_min, f.z_max),
            f.delta_xy,
            f.delta_z,
        )
    }

    pub fn to_file(&self) -> VoxelGridSpecFile {
        VoxelGridSpecFile {
            x_min: self.x.min,
            x_max: self.x.max,
            y_min: self.y.min,
            y_max: self.y.max,
            z_min: self.z.min,
            z_max: self.z.max,
            delta_xy: self.x.delta,
            delta_z: self.z.delta,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("spec serialises")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    pub fn x_axis(&self) -> &Axis {
        &self.x
    }
    pub fn y_axis(&self) -> &Axis {
        &self.y
    }
    pub fn z_axis(&self) -> &Axis {
        &self.z
    }

    pub fn nx(&self) -> usize {
        self.x.n
    }
    pub fn ny(&self) -> usize {
        self.y.n
    }
    pub fn nz(&self) -> usize {
        self.z.n
    }
    pub fn z_min(&self) -> f64 {
        self.z.min
    }
    pub fn z_max(&self) -> f64 {
        self.z.max
    }
    pub fn delta_xy(&self) -> f64 {
        self.x.delta
    }
    pub fn delta_z(&self) -> f64 {
        self.z.delta
    }

    /// Number of BEV cells, `X * Y`.
    pub fn bev_len(&self) -> usize {
        self.x.n * self.y.n
    }

    /// Number of voxels, `X * Y * Z`.
    pub fn voxel_len(&self) -> usize {
        self.bev_len() * self.z.n
    }

    #[inline]
    pub fn bev_index(&self, ix: usize, iy: usize) -> usize {
        ix * self.y.n + iy
    }

    #[inline]
    pub fn bev_coords(&self, cell: usize) -> (usize, usize) {
        (cell / self.y.n, cell % self.y.n)
    }

    #[inline]
    pub fn linear_index(&self, idx: VoxelIndex) -> usize {
        self.bev_index(idx.ix, idx.iy) * self.z.n + idx.iz
    }

    #[inline]
    pub fn voxel_from_linear(&self, i: usize) -> VoxelIndex {
        let (ix, iy) = self.bev_coords(i / self.z.n);
        VoxelIndex {
            ix,
            iy,
            iz: i % self.z.n,
        }
    }

    pub fn contains_index(&self, idx: VoxelIndex) -> bool {
        idx.ix < self.x.n && idx.iy < self.y.n && idx.iz < self.z.n
    }

    /// Voxel containing `p`, or `None` when `p` lies outside the half-open box.
    #[inline]
    pub fn voxel_index(&self, p: &Point3<f64>) -> Option<VoxelIndex> {
        Some(VoxelIndex {
            ix: self.x.index(p.x)?,
            iy: self.y.index(p.y)?,
            iz: self.z.index(p.z)?,
        })
    }

    pub fn voxel_center(&self, idx: VoxelIndex) -> Result<Point3<f64>> {
        if !self.contains_index(idx) {
            return Err(Error::Range(format!(
                "voxel {idx:?} outside grid {}x{}x{}",
                self.x.n, self.y.n, self.z.n
            )));
        }
        Ok(Point3::new(
            self.x.center(idx.ix),
            self.y.center(idx.iy),
            self.z.center(idx.iz),
        ))
    }

    /// Horizontal centre of BEV cell `(ix, iy)`.
    #[inline]
    pub fn cell_center_xy(&self, ix: usize, iy: usize) -> (f64, f64) {
        (self.x.center(ix), self.y.center(iy))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoxelIndex {
    pub ix: usize,
    pub iy: usize,
    pub iz: usize,
}

impl VoxelIndex {
    pub const fn new(ix: usize, iy: usize, iz: usize) -> Self {
        Self { ix, iy, iz }
    }
}

/// Points in the ego frame, metres. All coordinates are finite.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self> {
        if let Some(i) = points
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(Error::Domain(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point3<f64>> {
        self.points
    }
}
