//! Incremental voxel traversal (Amanatides & Woo) over a [`VoxelGridSpec`].

use nalgebra::{Point3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Axis, VoxelGridSpec, VoxelIndex};
use crate::heightmap::{SemanticVoxelGrid, FREE_CLASS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelVisit {
    pub voxel: VoxelIndex,
    /// Ray parameter at which the ray enters the voxel.
    pub t_enter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayHit {
    pub class: u8,
    /// Distance from the origin to the entry point of the hit voxel.
    pub depth: f64,
    #[serde(skip)]
    pub voxel: VoxelIndex,
}

/// Ray-parameter interval where the ray is inside the grid box, clipped to `t >= 0`.
fn clip_to_box(spec: &VoxelGridSpec, o: &Point3<f64>, d: &Vector3<f64>) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for (a, o, d) in [
        (spec.x_axis(), o.x, d.x),
        (spec.y_axis(), o.y, d.y),
        (spec.z_axis(), o.z, d.z),
    ] {
        if d == 0.0 {
            if !(o >= a.min && o < a.max) {
                return None;
            }
            continue;
        }
        let (t0, t1) = ((a.min - o) / d, (a.max - o) / d);
        lo = lo.max(t0.min(t1));
        hi = hi.min(t0.max(t1));
    }
    (lo < hi).then_some((lo, hi))
}

fn entry_index(a: &Axis, v: f64) -> usize {
    let mut i = ((v - a.min) / a.delta).floor().clamp(0.0, (a.n - 1) as f64) as usize;
    while i > 0 && v < a.boundary(i) {
        i -= 1;
    }
    while i + 1 < a.n && v >= a.boundary(i + 1) {
        i += 1;
    }
    i
}

/// Iterator over the voxels pierced by a ray, in visitation order.
pub struct Traversal<'a> {
    axes: [&'a Axis; 3],
    origin: [f64; 3],
    dir: [f64; 3],
    idx: [usize; 3],
    t_next: [f64; 3],
    t_cur: f64,
    t_exit: f64,
    done: bool,
}

impl Traversal<'_> {
    fn next_crossing(&self, axis: usize) -> f64 {
        let (a, o, d, i) = (self.axes[axis], self.origin[axis], self.dir[axis], self.idx[axis]);
        if d > 0.0 {
            (a.boundary(i + 1) - o) / d
        } else if d < 0.0 {
            (a.boundary(i) - o) / d
        } else {
            f64::INFINITY
        }
    }
}

impl Iterator for Traversal<'_> {
    type Item = VoxelVisit;

    fn next(&mut self) -> Option<VoxelVisit> {
        if self.done {
            return None;
        }
        let visit = VoxelVisit {
            voxel: VoxelIndex::new(self.idx[0], self.idx[1], self.idx[2]),
            t_enter: self.t_cur,
        };
        let axis = (0..3)
            .min_by(|&a, &b| self.t_next[a].total_cmp(&self.t_next[b]))
            .expect("three axes");
        let t = self.t_next[axis];
        let n = self.axes[axis].n;
        let stepped = if self.dir[axis] > 0.0 {
            (self.idx[axis] + 1 < n).then(|| self.idx[axis] + 1)
        } else {
            self.idx[axis].checked_sub(1)
        };
        match stepped {
            Some(i) if t < self.t_exit => {
                self.idx[axis] = i;
                self.t_cur = t.max(self.t_cur);
                self.t_next[axis] = self.next_crossing(axis);
            }
            _ => self.done = true,
        }
        Some(visit)
    }
}

/// Voxels pierced by the ray `origin + t * dir`, `t >= 0`.
pub fn traverse<'a>(spec: &'a VoxelGridSpec, origin: &Point3<f64>, dir: &Vector3<f64>) -> Traversal<'a> {
    let axes = [spec.x_axis(), spec.y_axis(), spec.z_axis()];
    let mut tr = Traversal {
        axes,
        origin: [origin.x, origin.y, origin.z],
        dir: [dir.x, dir.y, dir.z],
        idx: [0; 3],
        t_next: [f64::INFINITY; 3],
        t_cur: 0.0,
        t_exit: 0.0,
        done: true,
    };
    let Some((t0, t1)) = clip_to_box(spec, origin, dir) else {
        return tr;
    };
    let p = origin + dir * t0;
    for k in 0..3 {
        tr.idx[k] = entry_index(axes[k], p[k]);
    }
    for k in 0..3 {
        tr.t_next[k] = tr.next_crossing(k);
    }
    tr.t_cur = t0;
    tr.t_exit = t1;
    tr.done = false;
    tr
}

/// First non-free voxel along a unit-direction ray.
pub fn ray_first_hit(grid: &SemanticVoxelGrid, origin: &Point3<f64>, dir: &Vector3<f64>) -> Result<Option<RayHit>> {
    if !(origin.x.is_finite() && origin.y.is_finite() && origin.z.is_finite()) {
        return Err(Error::Domain("ray origin must be finite".into()));
    }
    if !dir.iter().all(|d| d.is_finite()) || (dir.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("ray direction must be unit length, |d| = {}", dir.norm())));
    }
    Ok(traverse(grid.spec(), origin, dir).find_map(|v| {
        let class = grid.get(v.voxel);
        (class != FREE_CLASS).then_some(RayHit {
            class,
            depth: v.t_enter,
            voxel: v.voxel,
        })
    }))
}
