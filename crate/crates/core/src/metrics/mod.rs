//! Occupancy metrics: voxel-wise IoU/mIoU and ray-based RayIoU.

mod rayiou;
mod traversal;

pub use rayiou::{ray_fan, rayiou, RayIouReport, RayQuery, DEFAULT_THRESHOLDS};
pub use traversal::{ray_first_hit, traverse, RayHit, VoxelVisit};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::heightmap::{SemanticVoxelGrid, FREE_CLASS};
use crate::par;

/// Per-class voxel tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ClassCounts {
    pub intersection: u64,
    pub predicted: u64,
    pub ground_truth: u64,
}

impl ClassCounts {
    pub fn union(&self) -> u64 {
        self.predicted + self.ground_truth - self.intersection
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionCounts {
    /// Indexed by class id; `classes[c].0 == c` except for the free entry.
    pub classes: Vec<(u8, ClassCounts)>,
}

/// Tallies per-class intersections. With `ignore_free` the free label is not a
/// class; otherwise it is scored like any other and appended last.
pub fn confusion(pred: &SemanticVoxelGrid, gt: &SemanticVoxelGrid, ignore_free: bool) -> Result<ConfusionCounts> {
    if pred.spec() != gt.spec() {
        return Err(Error::Shape("prediction and ground truth use different grids".into()));
    }
    if pred.num_classes() != gt.num_classes() {
        return Err(Error::Shape(format!(
            "class vocabularies differ ({} vs {})",
            pred.num_classes(),
            gt.num_classes()
        )));
    }
    let (p, g) = (pred.labels(), gt.labels());
    const CHUNK: usize = 1 << 16;
    let tally = par::map_reduce(
        p.len().div_ceil(CHUNK),
        || [[0u64; 3]; 256],
        |chunk| {
            let mut t = [[0u64; 3]; 256];
            let hi = ((chunk + 1) * CHUNK).min(p.len());
            for (&a, &b) in p[chunk * CHUNK..hi].iter().zip(&g[chunk * CHUNK..hi]) {
                t[a as usize][1] += 1;
                t[b as usize][2] += 1;
                if a == b {
                    t[a as usize][0] += 1;
                }
            }
            t
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                for k in 0..3 {
                    x[k] += y[k];
                }
            }
            a
        },
    );
    let to_counts = |t: [u64; 3]| ClassCounts {
        intersection: t[0],
        predicted: t[1],
        ground_truth: t[2],
    };
    let mut classes: Vec<_> = (0..pred.num_classes())
        .map(|c| (c, to_counts(tally[c as usize])))
        .collect();
    if !ignore_free {
        classes.push((FREE_CLASS, to_counts(tally[FREE_CLASS as usize])));
    }
    Ok(ConfusionCounts { classes })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiouReport {
    /// `(class, IoU)`; `None` where the class is absent from both grids.
    pub per_class: Vec<(u8, Option<f64>)>,
    pub miou: f64,
}

/// IoU per class and their mean over classes with a non-empty union.
pub fn miou(counts: &ConfusionCounts) -> Result<MiouReport> {
    let per_class: Vec<_> = counts
        .classes
        .iter()
        .map(|(c, k)| {
            let u = k.union();
            (*c, (u > 0).then(|| k.intersection as f64 / u as f64))
        })
        .collect();
    let scored: Vec<f64> = per_class.iter().filter_map(|(_, v)| *v).collect();
    if scored.is_empty() {
        return Err(Error::UndefinedMetric("no class occurs in either grid".into()));
    }
    let miou = scored.iter().sum::<f64>() / scored.len() as f64;
    Ok(MiouReport { per_class, miou })
}
