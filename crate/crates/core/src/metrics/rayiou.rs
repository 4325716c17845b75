//! Ray-based IoU.
//!
//! Every query ray is cast through both grids. For threshold `tau` and class
//! `c` a ray is a true positive when both grids hit `c` and the entry depths
//! differ by at most `tau`; otherwise a predicted hit of `c` is a false
//! positive and a ground-truth hit of `c` a false negative. `RayIoU_tau` is
//! the mean over classes with any TP, FP or FN of `TP / (TP + FP + FN)`, and
//! the headline number is the mean over thresholds.
//!
//! This follows the first-hit/depth-tolerance convention of the occupancy
//! benchmarks; the original benchmark code may differ in its ray set and
//! bookkeeping.

use std::collections::BTreeMap;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::traversal::{ray_first_hit, RayHit};
use crate::error::{Error, Result};
use crate::heightmap::SemanticVoxelGrid;
use crate::par;

/// Depth tolerances in metres.
pub const DEFAULT_THRESHOLDS: [f64; 3] = [1.0, 2.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayQuery {
    pub origin: [f64; 3],
    pub direction: [f64; 3],
}

impl RayQuery {
    pub fn new(origin: Point3<f64>, direction: Vector3<f64>) -> Self {
        Self {
            origin: [origin.x, origin.y, origin.z],
            direction: [direction.x, direction.y, direction.z],
        }
    }

    pub fn origin(&self) -> Point3<f64> {
        Point3::from(self.origin)
    }

    pub fn direction(&self) -> Vector3<f64> {
        Vector3::from(self.direction)
    }
}

/// Azimuth x elevation fan of unit rays from one origin.
pub fn ray_fan(origin: Point3<f64>, azimuths: usize, elevations: &[f64]) -> Vec<RayQuery> {
    let mut rays = Vec::with_capacity(azimuths * elevations.len());
    for a in 0..azimuths {
        let az = std::f64::consts::TAU * a as f64 / azimuths as f64;
        for &el in elevations {
            let d = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
            rays.push(RayQuery::new(origin, d));
        }
    }
    rays
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayIouReport {
    pub thresholds: Vec<f64>,
    /// `RayIoU` at each threshold.
    pub per_threshold: Vec<f64>,
    /// Per threshold, `(class, IoU)` for every scored class.
    pub per_class: Vec<Vec<(u8, f64)>>,
    pub mean: f64,
}

fn validate_thresholds(t: &[f64]) -> Result<()> {
    if t.is_empty() {
        return Err(Error::Config("at least one depth threshold is required".into()));
    }
    if t.iter().any(|&x| !(x > 0.0 && x.is_finite())) || t.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "thresholds must be positive and strictly increasing: {t:?}"
        )));
    }
    Ok(())
}

pub fn rayiou(
    pred: &SemanticVoxelGrid,
    gt: &SemanticVoxelGrid,
    queries: &[RayQuery],
    thresholds: &[f64],
) -> Result<RayIouReport> {
    if pred.spec() != gt.spec() {
        return Err(Error::Shape("prediction and ground truth use different grids".into()));
    }
    if queries.is_empty() {
        return Err(Error::Domain("no query rays".into()));
    }
    validate_thresholds(thresholds)?;

    let hits: Vec<Result<(Option<RayHit>, Option<RayHit>)>> = par::map_range(queries.len(), |i| {
        let (o, d) = (queries[i].origin(), queries[i].direction());
        Ok((ray_first_hit(pred, &o, &d)?, ray_first_hit(gt, &o, &d)?))
    });
    let hits = hits.into_iter().collect::<Result<Vec<_>>>()?;

    let mut per_threshold = Vec::with_capacity(thresholds.len());
    let mut per_class = Vec::with_capacity(thresholds.len());
    for &tau in thresholds {
        // class -> [tp, fp, fn]
        let mut tally: BTreeMap<u8, [u64; 3]> = BTreeMap::new();
        for (p, g) in &hits {
            let tp = match (p, g) {
                (Some(p), Some(g)) => p.class == g.class && (p.depth - g.depth).abs() <= tau,
                _ => false,
            };
            if tp {
                tally.entry(p.unwrap().class).or_default()[0] += 1;
                continue;
            }
            if let Some(p) = p {
                tally.entry(p.class).or_default()[1] += 1;
            }
            if let Some(g) = g {
                tally.entry(g.class).or_default()[2] += 1;
            }
        }
        if tally.is_empty() {
            return Err(Error::UndefinedMetric("no ray hits anything in either grid".into()));
        }
        let classes: Vec<(u8, f64)> = tally
            .iter()
            .map(|(&c, &[tp, fp, fn_])| (c, tp as f64 / (tp + fp + fn_) as f64))
            .collect();
        per_threshold.push(classes.iter().map(|(_, v)| v).sum::<f64>() / classes.len() as f64);
        per_class.push(classes);
    }
    let mean = per_threshold.iter().sum::<f64>() / per_threshold.len() as f64;
    Ok(RayIouReport {
        thresholds: thresholds.to_vec(),
        per_threshold,
        per_class,
        mean,
    })
}
