//! Progressive height conditioning.
//!
//! During training the conditioning map starts from ground-truth heights and
//! anneals toward LiDAR heights. `rho(e)` is the per-cell probability (or
//! blend weight) of taking the ground-truth value at epoch `e`.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hash::cell_uniform;
use crate::heightmap::HeightMap;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Cosine,
    Step,
}

impl FromStr for ScheduleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Self::Cosine),
            "step" => Ok(Self::Step),
            _ => Err(Error::Config(format!("unknown schedule {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleParams {
    pub total_epochs: u32,
    pub kind: ScheduleKind,
    /// Fraction of training spent at `rho = 1` under the step schedule.
    pub step_fraction: f64,
}

impl ScheduleParams {
    pub fn cosine(total_epochs: u32) -> Self {
        Self {
            total_epochs,
            kind: ScheduleKind::Cosine,
            step_fraction: 0.5,
        }
    }

    pub fn step(total_epochs: u32, step_fraction: f64) -> Self {
        Self {
            total_epochs,
            kind: ScheduleKind::Step,
            step_fraction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_epochs == 0 {
            return Err(Error::Config("total epochs must be >= 1".into()));
        }
        if self.kind == ScheduleKind::Step && !(self.step_fraction > 0.0 && self.step_fraction < 1.0) {
            return Err(Error::Config(format!(
                "step fraction {} must lie in (0, 1)",
                self.step_fraction
            )));
        }
        Ok(())
    }
}

/// Mixing probability at epoch `epoch`.
pub fn schedule_rho(epoch: u32, params: &ScheduleParams) -> Result<f64> {
    params.validate()?;
    let total = params.total_epochs;
    if epoch > total {
        return Err(Error::Range(format!("epoch {epoch} beyond {total} total epochs")));
    }
    Ok(match params.kind {
        ScheduleKind::Cosine => 0.5 * (1.0 + (PI * epoch as f64 / total as f64).cos()),
        ScheduleKind::Step => {
            if (epoch as f64) < params.step_fraction * total as f64 {
                1.0
            } else {
                0.0
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixMode {
    /// Per-cell Bernoulli replacement by the ground-truth value.
    Replace,
    /// `rho * gt + (1 - rho) * lidar`.
    Lerp,
}

impl FromStr for MixMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "replace" => Ok(Self::Replace),
            "lerp" => Ok(Self::Lerp),
            _ => Err(Error::Config(format!("unknown mix mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MixConfig {
    pub mode: MixMode,
    pub seed: u64,
}

/// Mixes LiDAR and ground-truth heights.
///
/// Only cells valid in both maps can change. The output mask is always the
/// LiDAR mask: a ground-truth height never revives an empty LiDAR pillar.
/// Replacement draws are a hash of `(seed, i_x, i_y)`, so the output is
/// independent of evaluation order and thread count.
pub fn mix(h_lidar: &HeightMap, h_gt: &HeightMap, rho: f64, cfg: &MixConfig) -> Result<HeightMap> {
    h_lidar.ensure_same_grid(h_gt)?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Range(format!("rho {rho} outside [0, 1]")));
    }
    let spec = *h_lidar.spec();
    let cells = par::map_range(spec.bev_len(), |c| {
        let lidar = h_lidar.cell(c)?;
        let Some(gt) = h_gt.cell(c) else {
            return Some(lidar);
        };
        Some(match cfg.mode {
            MixMode::Replace => {
                let (ix, iy) = spec.bev_coords(c);
                if cell_uniform(cfg.seed, ix, iy) < rho {
                    gt
                } else {
                    lidar
                }
            }
            MixMode::Lerp => {
                let v = rho * gt + (1.0 - rho) * lidar;
                v.clamp(lidar.min(gt), lidar.max(gt))
            }
        })
    });
    HeightMap::from_cells(spec, cells)
}

/// Inference-time conditioning: the LiDAR map is used as is.
pub fn condition_for_inference(h_lidar: &HeightMap) -> HeightMap {
    h_lidar.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::VoxelGridSpec;
    use proptest::prelude::*;

    fn spec() -> VoxelGridSpec {
        VoxelGridSpec::new((0.0, 40.0), (0.0, 40.0), (-1.0, 5.4), 0.4, 0.4).unwrap()
    }

    fn pair(seed: u64) -> (HeightMap, HeightMap) {
        let s = spec();
        let mut lidar = HeightMap::invalid(s);
        let mut gt = HeightMap::invalid(s);
        for c in 0..s.bev_len() {
            let (ix, iy) = s.bev_coords(c);
            let u = crate::hash::cell_uniform(seed, ix, iy);
            let k = (u * 16.0) as usize + 1;
            if u < 0.9 {
                lidar.set(ix, iy, Some(s.z_axis().boundary(k.min(16))));
            }
            if u > 0.1 {
                gt.set(ix, iy, Some(s.z_axis().boundary((17 - k).clamp(1, 16))));
            }
        }
        (lidar, gt)
    }

    #[test]
    fn cosine_examples() {
        let p = ScheduleParams::cosine(24);
        assert_eq!(schedule_rho(0, &p).unwrap(), 1.0);
        assert_eq!(schedule_rho(24, &p).unwrap(), 0.0);
        let r = schedule_rho(6, &p).unwrap();
        assert!((r - 0.853_553_390_593_273_7).abs() < 1e-9);
        assert!(matches!(schedule_rho(25, &p), Err(Error::Range(_))));
        assert!(schedule_rho(0, &ScheduleParams::cosine(0)).is_err());
    }

    #[test]
    fn cosine_monotone() {
        for total in 1..60 {
            let p = ScheduleParams::cosine(total);
            let rs: Vec<f64> = (0..=total).map(|e| schedule_rho(e, &p).unwrap()).collect();
            assert!(rs.windows(2).all(|w| w[1] <= w[0]));
            assert!(rs.iter().all(|r| (0.0..=1.0).contains(r)));
        }
    }

    #[test]
    fn step_schedule() {
        let p = ScheduleParams::step(24, 0.5);
        assert_eq!(schedule_rho(11, &p).unwrap(), 1.0);
        assert_eq!(schedule_rho(12, &p).unwrap(), 0.0);
        assert_eq!(schedule_rho(24, &p).unwrap(), 0.0);
        assert!(schedule_rho(0, &ScheduleParams::step(24, 1.0)).is_err());
    }

    #[test]
    fn rho_one_takes_gt() {
        let (l, g) = pair(1);
        for mode in [MixMode::Replace, MixMode::Lerp] {
            let m = mix(&l, &g, 1.0, &MixConfig { mode, seed: 9 }).unwrap();
            for c in 0..l.spec().bev_len() {
                match (l.cell(c), g.cell(c)) {
                    (Some(_), Some(gv)) => assert_eq!(m.cell(c), Some(gv)),
                    (lv, _) => assert_eq!(m.cell(c), lv),
                }
            }
        }
    }

    #[test]
    fn rho_zero_is_lidar() {
        let (l, g) = pair(2);
        for mode in [MixMode::Replace, MixMode::Lerp] {
            let m = mix(&l, &g, 0.0, &MixConfig { mode, seed: 9 }).unwrap();
            assert_eq!(m, l);
            assert_eq!(m, condition_for_inference(&l));
        }
    }

    #[test]
    fn half_replaces_about_half() {
        let (l, g) = pair(3);
        let m = mix(&l, &g, 0.5, &MixConfig { mode: MixMode::Replace, seed: 77 }).unwrap();
        let (mut both, mut replaced) = (0usize, 0usize);
        for c in 0..l.spec().bev_len() {
            if let (Some(lv), Some(gv)) = (l.cell(c), g.cell(c)) {
                if lv != gv {
                    both += 1;
                    replaced += usize::from(m.cell(c) == Some(gv));
                }
            }
        }
        let frac = replaced as f64 / both as f64;
        assert!(both > 5000);
        assert!((0.48..=0.52).contains(&frac), "{frac}");
    }

    #[test]
    fn grid_mismatch_is_shape_error() {
        let (l, _) = pair(1);
        let other = HeightMap::invalid(VoxelGridSpec::occ3d());
        let cfg = MixConfig { mode: MixMode::Replace, seed: 0 };
        assert!(matches!(mix(&l, &other, 0.5, &cfg), Err(Error::Shape(_))));
        assert!(matches!(mix(&l, &l, 1.5, &cfg), Err(Error::Range(_))));
    }

    #[test]
    fn inference_is_identity() {
        let (l, _) = pair(4);
        let c = condition_for_inference(&l);
        assert_eq!(c, l);
        assert_eq!(c.valid_mask(), l.valid_mask());
    }

    proptest! {
        #[test]
        fn replace_picks_an_input_value(seed in any::<u64>(), rho in 0.0f64..=1.0) {
            let (l, g) = pair(seed);
            let m = mix(&l, &g, rho, &MixConfig { mode: MixMode::Replace, seed }).unwrap();
            prop_assert_eq!(m.valid_mask(), l.valid_mask());
            for c in 0..l.spec().bev_len() {
                if let Some(v) = m.cell(c) {
                    prop_assert!(Some(v) == l.cell(c) || Some(v) == g.cell(c));
                }
            }
        }

        #[test]
        fn lerp_stays_between(seed in any::<u64>(), rho in 0.0f64..=1.0) {
            let (l, g) = pair(seed);
            let m = mix(&l, &g, rho, &MixConfig { mode: MixMode::Lerp, seed }).unwrap();
            prop_assert_eq!(m.valid_mask(), l.valid_mask());
            for c in 0..l.spec().bev_len() {
                if let (Some(lv), Some(gv)) = (l.cell(c), g.cell(c)) {
                    let v = m.cell(c).unwrap();
                    prop_assert!(v >= lv.min(gv) && v <= lv.max(gv));
                }
            }
        }
    }
}
