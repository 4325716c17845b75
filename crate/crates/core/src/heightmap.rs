//! LiDAR occupancy, BEV height maps and semantic voxel grids.
//!
//! A pillar's height is the upper boundary of its highest occupied voxel,
//! `z_min + (i_z* + 1) * delta_z`. Empty pillars are invalid.

use crate::error::{Error, Result};
use crate::grid::{PointCloud, VoxelGridSpec, VoxelIndex};
use crate::par;

/// Label reserved for unoccupied space.
pub const FREE_CLASS: u8 = 255;

/// Object-class vocabulary size used when none is given (Occ3D's 17 classes).
pub const DEFAULT_NUM_CLASSES: u8 = 17;

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryOccupancyGrid {
    spec: VoxelGridSpec,
    bits: Vec<bool>,
}

impl BinaryOccupancyGrid {
    pub fn empty(spec: VoxelGridSpec) -> Self {
        Self {
            bits: vec![false; spec.voxel_len()],
            spec,
        }
    }

    pub fn from_bits(spec: VoxelGridSpec, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != spec.voxel_len() {
            return Err(Error::Shape(format!(
                "{} occupancy bits for a {}-voxel grid",
                bits.len(),
                spec.voxel_len()
            )));
        }
        Ok(Self { spec, bits })
    }

    pub fn spec(&self) -> &VoxelGridSpec {
        &self.spec
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, idx: VoxelIndex) -> bool {
        self.bits[self.spec.linear_index(idx)]
    }

    pub fn set(&mut self, idx: VoxelIndex) {
        let i = self.spec.linear_index(idx);
        self.bits[i] = true;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Per-BEV-cell metric height with an explicit validity mask.
///
/// Invalid cells hold `NaN` in `values`; the mask is authoritative.
#[derive(Debug, Clone)]
pub struct HeightMap {
    spec: VoxelGridSpec,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl PartialEq for HeightMap {
    /// Bitwise on valid cells; invalid cells compare equal whatever they hold.
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
            && self.valid == other.valid
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.valid)
                .all(|((a, b), &v)| !v || a.to_bits() == b.to_bits())
    }
}

impl HeightMap {
    /// A map with every cell invalid.
    pub fn invalid(spec: VoxelGridSpec) -> Self {
        Self {
            values: vec![f64::NAN; spec.bev_len()],
            valid: vec![false; spec.bev_len()],
            spec,
        }
    }

    /// A map with every cell valid at height `h`.
    pub fn constant(spec: VoxelGridSpec, h: f64) -> Self {
        Self {
            values: vec![h; spec.bev_len()],
            valid: vec![true; spec.bev_len()],
            spec,
        }
    }

    /// Builds a map from optional per-cell heights in BEV linear order.
    pub fn from_cells(spec: VoxelGridSpec, cells: Vec<Option<f64>>) -> Result<Self> {
        if cells.len() != spec.bev_len() {
            return Err(Error::Shape(format!(
                "{} cells for a {}x{} BEV grid",
                cells.len(),
                spec.nx(),
                spec.ny()
            )));
        }
        if cells.iter().flatten().any(|h| !h.is_finite()) {
            return Err(Error::Domain("valid heights must be finite".into()));
        }
        let valid = cells.iter().map(Option::is_some).collect();
        let values = cells.into_iter().map(|c| c.unwrap_or(f64::NAN)).collect();
        Ok(Self {
            spec,
            values,
            valid,
        })
    }

    pub fn spec(&self) -> &VoxelGridSpec {
        &self.spec
    }

    pub fn get(&self, ix: usize, iy: usize) -> Option<f64> {
        self.cell(self.spec.bev_index(ix, iy))
    }

    /// Height at linear BEV index `cell`.
    #[inline]
    pub fn cell(&self, cell: usize) -> Option<f64> {
        self.valid[cell].then(|| self.values[cell])
    }

    pub fn set(&mut self, ix: usize, iy: usize, h: Option<f64>) {
        let c = self.spec.bev_index(ix, iy);
        self.valid[c] = h.is_some();
        self.values[c] = h.unwrap_or(f64::NAN);
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn iter_cells(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        (0..self.values.len()).map(|c| self.cell(c))
    }

    pub(crate) fn ensure_same_grid(&self, other: &HeightMap) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::Shape("height maps are defined on different grids".into()));
        }
        Ok(())
    }
}

/// Dense voxel labels. Each label is `< num_classes` or [`FREE_CLASS`].
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticVoxelGrid {
    spec: VoxelGridSpec,
    labels: Vec<u8>,
    num_classes: u8,
}

impl SemanticVoxelGrid {
    pub fn free(spec: VoxelGridSpec, num_classes: u8) -> Result<Self> {
        Self::new(spec, vec![FREE_CLASS; spec.voxel_len()], num_classes)
    }

    pub fn new(spec: VoxelGridSpec, labels: Vec<u8>, num_classes: u8) -> Result<Self> {
        if num_classes == FREE_CLASS {
            return Err(Error::Config(format!(
                "at most {} classes; {FREE_CLASS} is reserved for free space",
                FREE_CLASS
            )));
        }
        if labels.len() != spec.voxel_len() {
            return Err(Error::Shape(format!(
                "{} labels for a {}-voxel grid",
                labels.len(),
                spec.voxel_len()
            )));
        }
        if let Some(i) = first_unknown_label(&labels, num_classes) {
            return Err(Error::Domain(format!(
                "voxel {i} has label {} outside 0..{num_classes}",
                labels[i]
            )));
        }
        Ok(Self {
            spec,
            labels,
            num_classes,
        })
    }

    pub fn spec(&self) -> &VoxelGridSpec {
        &self.spec
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn num_classes(&self) -> u8 {
        self.num_classes
    }

    pub fn free_class(&self) -> u8 {
        FREE_CLASS
    }

    pub fn get(&self, idx: VoxelIndex) -> u8 {
        self.labels[self.spec.linear_index(idx)]
    }

    pub fn set(&mut self, idx: VoxelIndex, label: u8) -> Result<()> {
        if label != FREE_CLASS && label >= self.num_classes {
            return Err(Error::Domain(format!("label {label} outside vocabulary")));
        }
        let i = self.spec.linear_index(idx);
        self.labels[i] = label;
        Ok(())
    }

    /// Occupancy (label != free) as a binary grid.
    pub fn occupancy(&self) -> BinaryOccupancyGrid {
        BinaryOccupancyGrid {
            spec: self.spec,
            bits: self.labels.iter().map(|&l| l != FREE_CLASS).collect(),
        }
    }
}

pub(crate) fn first_unknown_label(labels: &[u8], num_classes: u8) -> Option<usize> {
    labels
        .iter()
        .position(|&l| l != FREE_CLASS && l >= num_classes)
}

pub fn build_occupancy(points: &PointCloud, spec: &VoxelGridSpec) -> BinaryOccupancyGrid {
    let mut grid = BinaryOccupancyGrid::empty(*spec);
    for idx in points.points().iter().filter_map(|p| spec.voxel_index(p)) {
        grid.set(idx);
    }
    grid
}

/// Collapses each pillar to the upper boundary of its highest occupied voxel.
pub fn collapse_height(grid: &BinaryOccupancyGrid) -> HeightMap {
    let spec = *grid.spec();
    let nz = spec.nz();
    let z_axis = *spec.z_axis();
    let cells = par::map_range(spec.bev_len(), |cell| {
        let pillar = &grid.bits[cell * nz..(cell + 1) * nz];
        pillar
            .iter()
            .rposition(|&b| b)
            .map(|top| z_axis.boundary(top + 1))
    });
    HeightMap::from_cells(spec, cells).expect("collapse yields one finite height per cell")
}

pub fn heightmap_from_points(points: &PointCloud, spec: &VoxelGridSpec) -> HeightMap {
    collapse_height(&build_occupancy(points, spec))
}

/// Ground-truth heights under the same rule, with non-free voxels as occupied.
pub fn heightmap_from_semantic(gt: &SemanticVoxelGrid) -> HeightMap {
    collapse_height(&gt.occupancy())
}
