use std::path::Path;

use nalgebra::{Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::VoxelGridSpec;
use crate::heightmap::{SemanticVoxelGrid, DEFAULT_NUM_CLASSES, FREE_CLASS};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ground {
    pub z_top: f64,
    pub class: u8,
}

/// Box rotated by `yaw` about +z; `size` is (length along local x, width, height).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub center: [f64; 3],
    pub size: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
    pub class: u8,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    #[serde(default)]
    pub ground: Option<Ground>,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneHit {
    pub point: Point3<f64>,
    pub class: u8,
    pub distance: f64,
}

impl SceneObject {
    pub fn center(&self) -> Point3<f64> {
        Point3::from(self.center)
    }

    fn half(&self) -> Vector3<f64> {
        Vector3::from(self.size) * 0.5
    }

    fn world_to_local(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vector3::z_axis(), -self.yaw)
    }

    pub fn to_local(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.world_to_local() * (p - self.center())
    }

    /// Closed point-in-box test.
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        let (l, h) = (self.to_local(p), self.half());
        l.x.abs() <= h.x && l.y.abs() <= h.y && l.z.abs() <= h.z
    }

    /// Whether `(x, y)` lies in the box's ground-plane rectangle.
    pub fn footprint_contains(&self, x: f64, y: f64) -> bool {
        let l = self.world_to_local() * Vector3::new(x - self.center[0], y - self.center[1], 0.0);
        let h = self.half();
        l.x.abs() <= h.x && l.y.abs() <= h.y
    }

    pub fn corners(&self) -> [Point3<f64>; 8] {
        let rot = self.world_to_local().inverse();
        let h = self.half();
        let c = self.center();
        std::array::from_fn(|i| {
            let s = |bit: usize| if i >> bit & 1 == 1 { 1.0 } else { -1.0 };
            c + rot * Vector3::new(s(0) * h.x, s(1) * h.y, s(2) * h.z)
        })
    }

    /// Ray parameter of the first surface crossing at `t >= 0` (slab method in
    /// the box frame). From inside the box this is the exit point.
    pub fn intersect(&self, o: &Point3<f64>, d: &Vector3<f64>) -> Option<f64> {
        let r = self.world_to_local();
        let (lo, ld, h) = (self.to_local(o), r * d, self.half());
        let (mut t_near, mut t_far) = (f64::NEG_INFINITY, f64::INFINITY);
        for k in 0..3 {
            if ld[k] == 0.0 {
                if lo[k].abs() > h[k] {
                    return None;
                }
                continue;
            }
            let (a, b) = ((-h[k] - lo[k]) / ld[k], (h[k] - lo[k]) / ld[k]);
            t_near = t_near.max(a.min(b));
            t_far = t_far.min(a.max(b));
        }
        if t_near > t_far || t_far < 0.0 {
            return None;
        }
        Some(if t_near >= 0.0 { t_near } else { t_far })
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(g) = &self.ground {
            if !g.z_top.is_finite() {
                return Err(Error::Config("ground height must be finite".into()));
            }
            if g.class == FREE_CLASS {
                return Err(Error::Config("ground may not use the free label".into()));
            }
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !o.size.iter().all(|&s| s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("object {i}: sizes must be positive")));
            }
            if !(o.center.iter().all(|c| c.is_finite()) && o.yaw.is_finite()) {
                return Err(Error::Config(format!("object {i}: pose must be finite")));
            }
            if o.class == FREE_CLASS {
                return Err(Error::Config(format!("object {i} uses the free label")));
            }
        }
        Ok(())
    }

    /// Vocabulary size large enough for every class in the scene.
    pub fn num_classes(&self) -> u8 {
        let max = self
            .objects
            .iter()
            .map(|o| o.class)
            .chain(self.ground.map(|g| g.class))
            .max();
        max.map_or(DEFAULT_NUM_CLASSES, |m| DEFAULT_NUM_CLASSES.max(m + 1))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let scene: Self = serde_json::from_str(s)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serialises")
    }
}

/// Nearest surface along a unit ray within `max_range`.
///
/// The ground is the plane `z = z_top`. Objects win ties with the ground,
/// and later objects win ties with earlier ones.
pub fn raycast_scene(scene: &SceneSpec, origin: &Point3<f64>, dir: &Vector3<f64>, max_range: f64) -> Option<SceneHit> {
    let mut best: Option<(f64, u8)> = None;
    if let Some(g) = &scene.ground {
        if dir.z != 0.0 {
            let t = (g.z_top - origin.z) / dir.z;
            if t >= 0.0 {
                best = Some((t, g.class));
            }
        }
    }
    for o in &scene.objects {
        if let Some(t) = o.intersect(origin, dir) {
            if best.is_none_or(|(bt, _)| t <= bt) {
                best = Some((t, o.class));
            }
        }
    }
    let (t, class) = best.filter(|&(t, _)| t <= max_range)?;
    let mut point = origin + dir * t;
    if let Some(g) = &scene.ground {
        if class == g.class && (point.z - g.z_top).abs() < 1e-9 {
            point.z = g.z_top;
        }
    }
    Some(SceneHit {
        point,
        class,
        distance: t,
    })
}

/// Labels each voxel by what contains its centre: the last object whose box
/// holds it, else the ground class when the centre is at or below the ground
/// top, else free.
pub fn rasterize_gt(scene: &SceneSpec, spec: &VoxelGridSpec) -> Result<SemanticVoxelGrid> {
    scene.validate()?;
    let nz = spec.nz();
    let columns = par::map_range(spec.bev_len(), |cell| {
        let (ix, iy) = spec.bev_coords(cell);
        let (x, y) = spec.cell_center_xy(ix, iy);
        let candidates: Vec<&SceneObject> = scene
            .objects
            .iter()
            .filter(|o| o.footprint_contains(x, y))
            .collect();
        (0..nz)
            .map(|iz| {
                let p = Point3::new(x, y, spec.z_axis().center(iz));
                if let Some(o) = candidates.iter().rev().find(|o| o.contains(&p)) {
                    o.class
                } else if scene.ground.is_some_and(|g| p.z <= g.z_top) {
                    scene.ground.unwrap().class
                } else {
                    FREE_CLASS
                }
            })
            .collect::<Vec<u8>>()
    });
    SemanticVoxelGrid::new(*spec, columns.concat(), scene.num_classes())
}

/// Euclidean distance from `p` to the nearest scene surface.
pub fn surface_distance(scene: &SceneSpec, p: &Point3<f64>) -> f64 {
    let ground = scene.ground.map_or(f64::INFINITY, |g| (p.z - g.z_top).abs());
    scene
        .objects
        .iter()
        .map(|o| {
            let (l, h) = (o.to_local(p), o.half());
            let q = l.abs() - h;
            let outside = q.map(|v| v.max(0.0)).norm();
            let inside = q.max().min(0.0);
            (outside + inside).abs()
        })
        .fold(ground, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::VoxelIndex;

    fn car() -> SceneObject {
        SceneObject {
            center: [10.0, 0.0, 0.9],
            size: [4.5, 1.8, 1.8],
            yaw: 0.0,
            class: 1,
        }
    }

    fn scene() -> SceneSpec {
        SceneSpec {
            ground: Some(Ground { z_top: 0.0, class: 0 }),
            objects: vec![car()],
        }
    }

    #[test]
    fn downward_ray_hits_ground() {
        let h = raycast_scene(&scene(), &Point3::new(0.0, 0.0, 2.0), &-Vector3::z(), 100.0).unwrap();
        assert_eq!(h.class, 0);
        assert_eq!(h.point.z, 0.0);
        assert_eq!(h.distance, 2.0);
    }

    #[test]
    fn horizontal_ray_hits_near_face() {
        let h = raycast_scene(&scene(), &Point3::new(0.0, 0.0, 1.0), &Vector3::x(), 100.0).unwrap();
        assert_eq!(h.class, 1);
        assert!((h.distance - 7.75).abs() < 1e-12);
        assert!((h.point - Point3::new(7.75, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn rotated_box_face_distance() {
        let mut o = car();
        o.yaw = std::f64::consts::FRAC_PI_2;
        let s = SceneSpec { ground: None, objects: vec![o] };
        // rotated by 90 degrees the 1.8 m width faces the ray
        let h = raycast_scene(&s, &Point3::new(0.0, 0.0, 1.0), &Vector3::x(), 100.0).unwrap();
        assert!((h.distance - 9.1).abs() < 1e-12);
    }

    #[test]
    fn ray_away_misses() {
        let d = Vector3::new(-1.0, 0.0, 1.0).normalize();
        assert_eq!(raycast_scene(&scene(), &Point3::new(0.0, 0.0, 1.0), &d, 100.0), None);
        assert_eq!(raycast_scene(&scene(), &Point3::new(0.0, 0.0, 1.0), &Vector3::x(), 5.0), None);
    }

    #[test]
    fn empty_scene_rasterizes_free() {
        let s = SceneSpec {
            ground: Some(Ground { z_top: -3.0, class: 0 }),
            objects: vec![],
        };
        let g = rasterize_gt(&s, &VoxelGridSpec::occ3d()).unwrap();
        assert!(g.labels().iter().all(|&l| l == FREE_CLASS));
    }

    #[test]
    fn unit_box_matches_center_test() {
        let spec = VoxelGridSpec::new((-2.0, 2.0), (-2.0, 2.0), (-2.0, 2.0), 0.4, 0.4).unwrap();
        let b = SceneObject {
            center: [0.2, 0.2, 0.2],
            size: [1.0, 1.0, 1.0],
            yaw: 0.3,
            class: 5,
        };
        let s = SceneSpec { ground: None, objects: vec![b] };
        let g = rasterize_gt(&s, &spec).unwrap();
        let mut n = 0;
        for i in 0..spec.voxel_len() {
            let idx = spec.voxel_from_linear(i);
            let c = spec.voxel_center(idx).unwrap();
            let l = b.to_local(&c);
            let inside = l.x.abs() <= 0.5 && l.y.abs() <= 0.5 && l.z.abs() <= 0.5;
            assert_eq!(g.get(idx) == 5, inside, "{idx:?}");
            n += usize::from(inside);
        }
        assert!(n >= 9);
        assert_eq!(g.get(VoxelIndex::new(5, 5, 5)), 5);
    }

    #[test]
    fn later_objects_win() {
        let a = car();
        let mut b = car();
        b.class = 7;
        let s = SceneSpec { ground: None, objects: vec![a, b] };
        let spec = VoxelGridSpec::occ3d();
        let g = rasterize_gt(&s, &spec).unwrap();
        let idx = spec.voxel_index(&Point3::new(10.1, 0.1, 0.5)).unwrap();
        assert_eq!(g.get(idx), 7);
    }

    #[test]
    fn corners_are_on_the_box() {
        let mut o = car();
        o.yaw = 0.7;
        for c in o.corners() {
            assert!(o.contains(&(c + (o.center() - c) * 1e-9)));
            let l = o.to_local(&c);
            assert!((l.abs() - o.half()).amax() < 1e-12);
        }
    }

    #[test]
    fn validation() {
        let mut s = scene();
        s.objects[0].size[2] = 0.0;
        assert!(s.validate().is_err());
        let mut s = scene();
        s.objects[0].class = FREE_CLASS;
        assert!(s.validate().is_err());
        assert!(SceneSpec::from_json(&scene().to_json()).is_ok());
        assert!(SceneSpec::from_json(r#"{"objects":[{"center":[0,0,0],"size":[1,1,1],"class":2,"extra":1}]}"#).is_err());
    }

    #[test]
    fn surface_distance_examples() {
        let s = scene();
        assert!((surface_distance(&s, &Point3::new(0.0, 0.0, 1.5)) - 1.5).abs() < 1e-12);
        assert!((surface_distance(&s, &Point3::new(7.0, 0.0, 1.0)) - 0.75).abs() < 1e-12);
        assert!(surface_distance(&s, &Point3::new(10.0, 0.0, 1.8)).abs() < 1e-12);
    }
}
