use std::collections::BTreeMap;

use nalgebra::{Point2, Point3};
use serde::Serialize;

use super::lidar::{simulate_lidar, LidarSpec};
use super::scene::{rasterize_gt, SceneObject, SceneSpec};
use crate::error::{Error, Result};
use crate::grid::VoxelGridSpec;
use crate::heightmap::{heightmap_from_points, heightmap_from_semantic, HeightMap};
use crate::projection::{sample_height_guided, sample_uniform, CameraModel, SamplingConfig};

#[derive(Debug, Clone, Copy)]
pub enum SamplingMode<'a> {
    Uniform,
    /// Pillars bounded by the given height map; invalid cells produce no points.
    HeightGuided(&'a HeightMap),
}

/// One projected reference point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HitRecord {
    pub object: usize,
    pub ix: usize,
    pub iy: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub u: f64,
    pub v: f64,
    pub in_frustum: bool,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HitRateResult {
    pub hits: usize,
    pub total: usize,
    pub hit_rate: f64,
    pub records: Vec<HitRecord>,
}

fn cross(o: Point2<f64>, a: Point2<f64>, b: Point2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Counter-clockwise convex hull (monotone chain), collinear points dropped.
pub fn convex_hull(points: &[Point2<f64>]) -> Vec<Point2<f64>> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point2<f64>> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2<f64>>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Inclusive point-in-convex-polygon test for a counter-clockwise hull.
pub fn in_convex(hull: &[Point2<f64>], p: Point2<f64>) -> bool {
    if hull.len() < 3 {
        return false;
    }
    let scale = hull.iter().map(|q| q.coords.amax()).fold(p.coords.amax(), f64::max).max(1.0);
    let eps = 1e-12 * scale * scale;
    (0..hull.len()).all(|i| cross(hull[i], hull[(i + 1) % hull.len()], p) >= -eps)
}

fn image_hull(camera: &CameraModel, object: &SceneObject, index: usize) -> Result<Vec<Point2<f64>>> {
    let mut corners = Vec::with_capacity(8);
    for c in object.corners() {
        let p = camera.project(&c);
        if p.depth <= 0.0 {
            return Err(Error::Domain(format!("object {index} is not entirely in front of the camera")));
        }
        corners.push(Point2::new(p.u, p.v));
    }
    Ok(convex_hull(&corners))
}

/// Projects reference points of every footprint cell into `camera` and counts
/// those landing inside the object's projected silhouette.
///
/// A cell belongs to an object's footprint when its centre lies in the box's
/// ground rectangle; a cell under two objects is evaluated once for each.
pub fn hitrate_experiment(
    scene: &SceneSpec,
    camera: &CameraModel,
    spec: &VoxelGridSpec,
    cfg: &SamplingConfig,
    mode: SamplingMode<'_>,
) -> Result<HitRateResult> {
    scene.validate()?;
    if scene.objects.is_empty() {
        return Err(Error::Domain("scene has no objects".into()));
    }
    let uniform = sample_uniform(spec, cfg)?;
    let guided = match mode {
        SamplingMode::Uniform => None,
        SamplingMode::HeightGuided(h) => {
            if h.spec() != spec {
                return Err(Error::Shape("height source uses a different grid".into()));
            }
            Some(sample_height_guided(h, cfg)?)
        }
    };

    let mut records = Vec::new();
    let mut footprint_cells = 0;
    for (o, object) in scene.objects.iter().enumerate() {
        let hull = image_hull(camera, object, o)?;
        for cell in 0..spec.bev_len() {
            let (ix, iy) = spec.bev_coords(cell);
            let (x, y) = spec.cell_center_xy(ix, iy);
            if !object.footprint_contains(x, y) {
                continue;
            }
            footprint_cells += 1;
            let heights = guided.as_ref().map_or(&uniform[..], |g| g.heights(cell));
            for (j, &z) in heights.iter().enumerate() {
                let p = camera.project(&Point3::new(x, y, z));
                let hit = p.valid && in_convex(&hull, Point2::new(p.u, p.v));
                records.push(HitRecord {
                    object: o,
                    ix,
                    iy,
                    j,
                    x,
                    y,
                    z,
                    u: p.u,
                    v: p.v,
                    in_frustum: p.valid,
                    hit,
                });
            }
        }
    }
    if footprint_cells == 0 {
        return Err(Error::Domain("no BEV cell centre lies inside any object footprint".into()));
    }
    if records.is_empty() {
        return Err(Error::Domain("every footprint cell is invalid in the height source".into()));
    }
    let hits = records.iter().filter(|r| r.hit).count();
    Ok(HitRateResult {
        hits,
        total: records.len(),
        hit_rate: hits as f64 / records.len() as f64,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    /// Bin centre in metres; bins are `bin_width` wide.
    pub center: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeightErrorStats {
    pub count: usize,
    /// Mean of `h_lidar - h_gt`.
    pub mean: f64,
    pub mean_abs: f64,
    pub max_abs: f64,
    pub bin_width: f64,
    pub histogram: Vec<HistogramBin>,
}

/// Statistics of `h_lidar - h_gt` over cells valid in both maps.
pub fn height_error_stats(h_lidar: &HeightMap, h_gt: &HeightMap) -> Result<HeightErrorStats> {
    h_lidar.ensure_same_grid(h_gt)?;
    let diffs: Vec<f64> = h_lidar
        .iter_cells()
        .zip(h_gt.iter_cells())
        .filter_map(|(a, b)| Some(a? - b?))
        .collect();
    if diffs.is_empty() {
        return Err(Error::Domain("no cell is valid in both height maps".into()));
    }
    let width = h_lidar.spec().delta_z();
    let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
    for d in &diffs {
        *bins.entry((d / width).round() as i64).or_default() += 1;
    }
    let n = diffs.len() as f64;
    Ok(HeightErrorStats {
        count: diffs.len(),
        mean: diffs.iter().sum::<f64>() / n,
        mean_abs: diffs.iter().map(|d| d.abs()).sum::<f64>() / n,
        max_abs: diffs.iter().fold(0.0, |m, d| m.max(d.abs())),
        bin_width: width,
        histogram: bins
            .into_iter()
            .map(|(k, count)| HistogramBin {
                center: k as f64 * width,
                count,
            })
            .collect(),
    })
}

/// LiDAR-derived heights against heights from the rasterized scene.
pub fn height_error_experiment(scene: &SceneSpec, lidar: &LidarSpec, spec: &VoxelGridSpec) -> Result<HeightErrorStats> {
    let cloud = simulate_lidar(scene, lidar)?;
    let h_lidar = heightmap_from_points(&cloud, spec);
    let h_gt = heightmap_from_semantic(&rasterize_gt(scene, spec)?);
    height_error_stats(&h_lidar, &h_gt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::canonical;

    #[test]
    fn hull_of_square_with_interior() {
        let pts: Vec<_> = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5), (0.5, 0.0)]
            .iter()
            .map(|&(x, y)| Point2::new(x, y))
            .collect();
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert!(in_convex(&h, Point2::new(0.5, 0.5)));
        assert!(in_convex(&h, Point2::new(1.0, 0.3)));
        assert!(!in_convex(&h, Point2::new(1.01, 0.3)));
        assert!(!in_convex(&h, Point2::new(-0.5, 0.5)));
    }

    #[test]
    fn canonical_uniform_half() {
        let (scene, cam, spec) = (canonical::scene(), canonical::camera(), canonical::grid());
        let r = hitrate_experiment(&scene, &cam, &spec, &SamplingConfig::default(), SamplingMode::Uniform).unwrap();
        assert_eq!(r.total, 48 * 4);
        assert_eq!(r.hit_rate, 0.5);
        assert!(r.records.iter().all(|rec| rec.hit == (rec.j < 2)));
    }

    #[test]
    fn canonical_guided_full() {
        let (scene, cam, spec) = (canonical::scene(), canonical::camera(), canonical::grid());
        let h = heightmap_from_semantic(&rasterize_gt(&scene, &spec).unwrap());
        let cfg = SamplingConfig::default();
        let r = hitrate_experiment(&scene, &cam, &spec, &cfg, SamplingMode::HeightGuided(&h)).unwrap();
        assert_eq!(r.total, 48 * 4);
        assert_eq!(r.hit_rate, 1.0);
    }

    #[test]
    fn ceiling_guided_equals_uniform() {
        let (scene, cam, spec) = (canonical::scene(), canonical::camera(), canonical::grid());
        let ceiling = HeightMap::constant(spec, spec.z_max());
        for n in [2, 4, 7] {
            let cfg = SamplingConfig::new(n).unwrap();
            let u = hitrate_experiment(&scene, &cam, &spec, &cfg, SamplingMode::Uniform).unwrap();
            let g = hitrate_experiment(&scene, &cam, &spec, &cfg, SamplingMode::HeightGuided(&ceiling)).unwrap();
            assert_eq!(u, g);
        }
    }

    #[test]
    fn no_footprint_is_domain_error() {
        let (mut scene, cam, _) = (canonical::scene(), canonical::camera(), ());
        // a sliver between cell centres
        scene.objects[0].size[1] = 0.1;
        scene.objects[0].center[1] = 0.0;
        let r = hitrate_experiment(&scene, &cam, &canonical::grid(), &SamplingConfig::default(), SamplingMode::Uniform);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn error_stats_identity_and_bins() {
        let spec = canonical::grid();
        let mut a = HeightMap::invalid(spec);
        a.set(0, 0, Some(1.8));
        a.set(0, 1, Some(0.2));
        assert_eq!(height_error_stats(&a, &a).unwrap().mean_abs, 0.0);
        let mut b = a.clone();
        b.set(0, 1, Some(0.6));
        let s = height_error_stats(&b, &a).unwrap();
        assert_eq!(s.count, 2);
        assert!((s.mean_abs - 0.2).abs() < 1e-12);
        assert_eq!(s.histogram.len(), 2);
        assert_eq!(s.histogram[1].count, 1);
        assert!((s.histogram[1].center - 0.4).abs() < 1e-12);
        assert!(matches!(
            height_error_stats(&a, &HeightMap::invalid(spec)),
            Err(Error::Domain(_))
        ));
    }
}
