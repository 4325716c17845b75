use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::grid::VoxelGridSpec;
use crate::heightmap::HeightMap;

/// Vertical samples per pillar when none is configured.
pub const DEFAULT_N_Z: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingConfig {
    pub n_z: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { n_z: DEFAULT_N_Z }
    }
}

impl SamplingConfig {
    pub fn new(n_z: usize) -> Result<Self> {
        let cfg = Self { n_z };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_z < 2 {
            return Err(Error::Config(format!(
                "need at least 2 vertical samples, got {}",
                self.n_z
            )));
        }
        Ok(())
    }
}

/// `n` heights from `bottom` to `top` at `alpha_j = j / (n - 1)`.
///
/// Written as `(1 - a) * bottom + a * top` so both endpoints are exact.
fn pillar_heights(bottom: f64, top: f64, n: usize) -> impl Iterator<Item = f64> {
    let last = (n - 1) as f64;
    (0..n).map(move |j| {
        let a = j as f64 / last;
        (1.0 - a) * bottom + a * top
    })
}

/// Which BEV cells carry a usable height.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityMask {
    nx: usize,
    ny: usize,
    mask: Vec<bool>,
}

impl ValidityMask {
    pub fn new(nx: usize, ny: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != nx * ny {
            return Err(Error::Shape(format!("{} mask cells for {nx}x{ny}", mask.len())));
        }
        Ok(Self { nx, ny, mask })
    }

    pub fn all(spec: &VoxelGridSpec, value: bool) -> Self {
        Self {
            nx: spec.nx(),
            ny: spec.ny(),
            mask: vec![value; spec.bev_len()],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn cell(&self, c: usize) -> bool {
        self.mask[c]
    }

    pub fn get(&self, ix: usize, iy: usize) -> bool {
        self.mask[ix * self.ny + iy]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

pub fn validity_mask(h: &HeightMap) -> ValidityMask {
    ValidityMask {
        nx: h.spec().nx(),
        ny: h.spec().ny(),
        mask: h.valid_mask().to_vec(),
    }
}

/// The same `n_z` heights for every pillar, spanning `[z_min, z_max]`.
pub fn sample_uniform(spec: &VoxelGridSpec, cfg: &SamplingConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    Ok(pillar_heights(spec.z_min(), spec.z_max(), cfg.n_z).collect())
}

/// Per-pillar reference heights and their ego-frame points.
///
/// Valid cells hold exactly `n_z` strictly increasing heights; invalid cells
/// hold none. Points sit at the horizontal cell centre.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePointSet {
    spec: VoxelGridSpec,
    n_z: usize,
    heights: Vec<f64>,
    valid: Vec<bool>,
}

impl ReferencePointSet {
    /// Uniform pillars for every cell (no masking).
    pub fn uniform(spec: &VoxelGridSpec, cfg: &SamplingConfig) -> Result<Self> {
        let column = sample_uniform(spec, cfg)?;
        Ok(Self {
            spec: *spec,
            n_z: cfg.n_z,
            heights: column.repeat(spec.bev_len()),
            valid: vec![true; spec.bev_len()],
        })
    }

    pub fn spec(&self) -> &VoxelGridSpec {
        &self.spec
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    pub fn is_valid(&self, cell: usize) -> bool {
        self.valid[cell]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Sample heights of BEV cell `cell`; empty for invalid cells.
    pub fn heights(&self, cell: usize) -> &[f64] {
        if self.valid[cell] {
            &self.heights[cell * self.n_z..(cell + 1) * self.n_z]
        } else {
            &[]
        }
    }

    /// Reference points of BEV cell `cell`, bottom to top.
    pub fn points(&self, cell: usize) -> impl Iterator<Item = Point3<f64>> + '_ {
        let (ix, iy) = self.spec.bev_coords(cell);
        let (x, y) = self.spec.cell_center_xy(ix, iy);
        self.heights(cell).iter().map(move |&z| Point3::new(x, y, z))
    }
}

/// Height-guided pillars: `[z_min, H(cell)]` for valid cells, nothing elsewhere.
pub fn sample_height_guided(h: &HeightMap, cfg: &SamplingConfig) -> Result<ReferencePointSet> {
    cfg.validate()?;
    let spec = *h.spec();
    let n = cfg.n_z;
    let z_min = spec.z_min();
    let mut heights = vec![f64::NAN; spec.bev_len() * n];
    for (c, top) in h.iter_cells().enumerate() {
        if let Some(top) = top {
            if top <= z_min {
                return Err(Error::Domain(format!(
                    "cell {c}: height {top} does not exceed z_min {z_min}"
                )));
            }
            for (slot, z) in heights[c * n..(c + 1) * n]
                .iter_mut()
                .zip(pillar_heights(z_min, top, n))
            {
                *slot = z;
            }
        }
    }
    Ok(ReferencePointSet {
        spec,
        n_z: n,
        heights,
        valid: h.valid_mask().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
    }

    #[test]
    fn uniform_occ3d() {
        let s = VoxelGridSpec::occ3d();
        let z = sample_uniform(&s, &SamplingConfig::new(4).unwrap()).unwrap();
        assert!(close(&z, &[-1.0, 1.0 + 2.0 / 15.0, 3.0 + 4.0 / 15.0, 5.4]));
        assert_eq!((z[0], z[3]), (-1.0, 5.4));
        let z2 = sample_uniform(&s, &SamplingConfig::new(2).unwrap()).unwrap();
        assert_eq!(z2, vec![-1.0, 5.4]);
        assert!(sample_uniform(&s, &SamplingConfig { n_z: 1 }).is_err());
        assert!(SamplingConfig::new(0).is_err());
    }

    #[test]
    fn guided_vehicle_pillar() {
        let s = VoxelGridSpec::occ3d();
        let mut h = HeightMap::invalid(s);
        h.set(10, 20, Some(1.8));
        let refs = sample_height_guided(&h, &SamplingConfig::default()).unwrap();
        let c = s.bev_index(10, 20);
        let z = refs.heights(c);
        assert!(close(z, &[-1.0, -1.0 / 15.0, 13.0 / 15.0, 1.8]));
        assert_eq!((z[0], z[3]), (-1.0, 1.8));
        assert!(refs.heights(0).is_empty());
        assert_eq!(refs.valid_count(), 1);
        let p: Vec<_> = refs.points(c).collect();
        assert!((p[3] - Point3::new(-35.8, -31.8, 1.8)).norm() < 1e-9);
    }

    #[test]
    fn ceiling_reduces_to_uniform() {
        let s = VoxelGridSpec::new((0.0, 2.0), (0.0, 1.2), (-1.0, 5.4), 0.4, 0.4).unwrap();
        for n in 2..12 {
            let cfg = SamplingConfig::new(n).unwrap();
            let guided = sample_height_guided(&HeightMap::constant(s, s.z_max()), &cfg).unwrap();
            let uniform = ReferencePointSet::uniform(&s, &cfg).unwrap();
            assert_eq!(guided, uniform);
            let u = sample_uniform(&s, &cfg).unwrap();
            for c in 0..s.bev_len() {
                assert!(guided.heights(c).iter().zip(&u).all(|(a, b)| a.to_bits() == b.to_bits()));
            }
        }
    }

    #[test]
    fn mask_follows_validity() {
        let s = VoxelGridSpec::occ3d();
        let mut h = HeightMap::invalid(s);
        assert_eq!(validity_mask(&h).count(), 0);
        h.set(3, 3, Some(0.2));
        let m = validity_mask(&h);
        assert_eq!(m.count(), 1);
        assert!(m.get(3, 3));
        assert_eq!(m.count(), h.valid_count());
    }

    #[test]
    fn degenerate_height_rejected() {
        let s = VoxelGridSpec::occ3d();
        let h = HeightMap::constant(s, s.z_min());
        assert!(matches!(
            sample_height_guided(&h, &SamplingConfig::default()),
            Err(Error::Domain(_))
        ));
    }

    proptest! {
        #[test]
        fn guided_increasing_and_bounded(k in 1usize..=16, n in 2usize..32) {
            let s = VoxelGridSpec::new((0.0, 0.4), (0.0, 0.4), (-1.0, 5.4), 0.4, 0.4).unwrap();
            let top = s.z_axis().boundary(k);
            let refs = sample_height_guided(&HeightMap::constant(s, top), &SamplingConfig::new(n).unwrap()).unwrap();
            let z = refs.heights(0);
            prop_assert_eq!(z.len(), n);
            prop_assert!(z.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(z[0], s.z_min());
            prop_assert_eq!(z[n - 1], top);
        }
    }
}
