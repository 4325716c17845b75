use std::path::Path;

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROTATION_TOLERANCE: f64 = 1e-9;

/// Pinhole camera with an ego-to-camera rigid transform.
///
/// Camera axes: x right, y down, z forward.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

/// JSON calibration document. `rotation` is row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraFile {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    /// Depth along the optical axis.
    pub depth: f64,
    /// In front of the camera and inside the image.
    pub valid: bool,
}

impl CameraModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::Config(format!("focal lengths ({fx}, {fy}) must be positive")));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::Config("principal point must be finite".into()));
        }
        if width == 0 || height == 0 {
            return Err(Error::Config("image size must be at least 1x1".into()));
        }
        if !translation.iter().all(|t| t.is_finite()) {
            return Err(Error::Config("translation must be finite".into()));
        }
        let ortho = (rotation * rotation.transpose() - Matrix3::identity()).amax();
        let det = rotation.determinant();
        if !(ortho <= ROTATION_TOLERANCE && (det - 1.0).abs() <= ROTATION_TOLERANCE) {
            return Err(Error::Config(format!(
                "rotation is not proper orthonormal (|RR^T - I| = {ortho:e}, det = {det})"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation,
            translation,
        })
    }

    /// Builds a camera whose centre sits at `position` (ego frame) with the
    /// given ego-to-camera rotation.
    #[allow(clippy::too_many_arguments)]
    pub fn looking_from(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        rotation: Matrix3<f64>,
        position: Point3<f64>,
    ) -> Result<Self> {
        let t = -(rotation * position.coords);
        Self::new(fx, fy, cx, cy, width, height, rotation, t)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Camera centre in the ego frame.
    pub fn center(&self) -> Point3<f64> {
        Point3::from(-(self.rotation.transpose() * self.translation))
    }

    pub fn to_camera(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.rotation * p.coords + self.translation
    }

    pub fn project(&self, p: &Point3<f64>) -> Projection {
        let pc = self.to_camera(p);
        let u = self.fx * pc.x / pc.z + self.cx;
        let v = self.fy * pc.y / pc.z + self.cy;
        let valid = pc.z > 0.0
            && u >= 0.0
            && u < f64::from(self.width)
            && v >= 0.0
            && v < f64::from(self.height);
        Projection {
            u,
            v,
            depth: pc.z,
            valid,
        }
    }

    /// Ego-frame point at optical-axis depth `depth` behind pixel `(u, v)`.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Result<Point3<f64>> {
        if !(depth > 0.0 && depth.is_finite()) {
            return Err(Error::Domain(format!("depth {depth} must be positive")));
        }
        let pc = Vector3::new(
            (u - self.cx) / self.fx * depth,
            (v - self.cy) / self.fy * depth,
            depth,
        );
        Ok(Point3::from(self.rotation.transpose() * (pc - self.translation)))
    }

    pub fn from_file(f: &CameraFile) -> Result<Self> {
        Self::new(
            f.fx,
            f.fy,
            f.cx,
            f.cy,
            f.width,
            f.height,
            Matrix3::from_row_slice(&f.rotation),
            Vector3::from_row_slice(&f.translation),
        )
    }

    pub fn to_file(&self) -> CameraFile {
        let r = &self.rotation;
        CameraFile {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
            rotation: [
                r[(0, 0)], r[(0, 1)], r[(0, 2)],
                r[(1, 0)], r[(1, 1)], r[(1, 2)],
                r[(2, 0)], r[(2, 1)], r[(2, 2)],
            ],
            translation: [self.translation.x, self.translation.y, self.translation.z],
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("camera serialises")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}
