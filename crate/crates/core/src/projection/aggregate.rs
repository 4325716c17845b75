use crate::error::{Error, Result};
use crate::grid::VoxelGridSpec;
use crate::par;

use super::camera::CameraModel;
use super::sampling::{ReferencePointSet, ValidityMask};

/// One camera's feature plane, row-major `[row][col][channel]`.
///
/// `scale` maps image pixels to feature coordinates (`1/stride`).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    scale: f64,
    data: Vec<f64>,
}

impl ImageFeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, scale: f64, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Shape("feature map dimensions must be positive".into()));
        }
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "{} values for a {height}x{width}x{channels} feature map",
                data.len()
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("feature scale {scale} must be positive")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("feature values must be finite".into()));
        }
        Ok(Self {
            height,
            width,
            channels,
            scale,
            data,
        })
    }

    pub fn constant(height: usize, width: usize, channels: usize, scale: f64, value: f64) -> Result<Self> {
        Self::new(height, width, channels, scale, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn scale(&self) -> f64 {
        self.scale
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> &[f64] {
        let i = (row * self.width + col) * self.channels;
        &self.data[i..i + self.channels]
    }
}

/// Bilinear feature at feature-plane coordinates `(u, v)` (`u` along columns).
///
/// Samples outside `[0, W-1] x [0, H-1]` are zero.
pub fn bilinear_sample(fm: &ImageFeatureMap, u: f64, v: f64) -> Vec<f64> {
    let mut out = vec![0.0; fm.channels];
    accumulate_bilinear(fm, u, v, 1.0, &mut out);
    out
}

/// Adds `weight * bilinear_sample(fm, u, v)` into `out`.
fn accumulate_bilinear(fm: &ImageFeatureMap, u: f64, v: f64, weight: f64, out: &mut [f64]) {
    let (w_max, h_max) = ((fm.width - 1) as f64, (fm.height - 1) as f64);
    if !(u >= 0.0 && u <= w_max && v >= 0.0 && v <= h_max) {
        return;
    }
    let (c0, r0) = (u.floor() as usize, v.floor() as usize);
    let (c1, r1) = ((c0 + 1).min(fm.width - 1), (r0 + 1).min(fm.height - 1));
    let (fu, fv) = (u - c0 as f64, v - r0 as f64);
    let taps = [
        (r0, c0, (1.0 - fu) * (1.0 - fv)),
        (r0, c1, fu * (1.0 - fv)),
        (r1, c0, (1.0 - fu) * fv),
        (r1, c1, fu * fv),
    ];
    for (r, c, w) in taps {
        if w == 0.0 {
            continue;
        }
        for (o, f) in out.iter_mut().zip(fm.at(r, c)) {
            *o += weight * w * f;
        }
    }
}

/// BEV query features, `X x Y x C`, BEV-linear cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct BevQueryGrid {
    spec: VoxelGridSpec,
    channels: usize,
    data: Vec<f64>,
}

impl BevQueryGrid {
    pub fn new(spec: VoxelGridSpec, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || data.len() != spec.bev_len() * channels {
            return Err(Error::Shape(format!(
                "{} query values for {}x{}x{channels}",
                data.len(),
                spec.nx(),
                spec.ny()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("query values must be finite".into()));
        }
        Ok(Self { spec, channels, data })
    }

    pub fn zeros(spec: VoxelGridSpec, channels: usize) -> Self {
        Self {
            spec,
            channels,
            data: vec![0.0; spec.bev_len() * channels],
        }
    }

    pub fn spec(&self) -> &VoxelGridSpec {
        &self.spec
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        &self.data[c * self.channels..(c + 1) * self.channels]
    }
}

/// Sampling offsets and weights supplied in place of learned attention.
///
/// Entry `(cell, j, k)` lives at `(cell * n_z + j) * n_points + k`; offsets are
/// in feature-plane coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingOffsets {
    pub n_z: usize,
    pub n_points: usize,
    pub offsets: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl SamplingOffsets {
    /// Zero offsets, every entry weighted `weight`.
    pub fn uniform(spec: &VoxelGridSpec, n_z: usize, n_points: usize, weight: f64) -> Self {
        let n = spec.bev_len() * n_z * n_points;
        Self {
            n_z,
            n_points,
            offsets: vec![[0.0, 0.0]; n],
            weights: vec![weight; n],
        }
    }

    #[inline]
    pub fn index(&self, cell: usize, j: usize, k: usize) -> usize {
        (cell * self.n_z + j) * self.n_points + k
    }
}

/// Masked deformable aggregation with supplied offsets and weights.
///
/// Masked-out cells are copied from `q`. For every other cell the output is
/// `sum_j sum_k sum_cam w[cell,j,k] * F_cam(pi_cam(R_j) * scale + off[cell,j,k])`,
/// summed over every camera whose frustum contains the reference point.
/// Reference points seen by no camera contribute nothing; no normalisation
/// is applied.
pub fn aggregate(
    q: &BevQueryGrid,
    refs: &ReferencePointSet,
    cameras: &[CameraModel],
    features: &[ImageFeatureMap],
    sampling: &SamplingOffsets,
    mask: &ValidityMask,
) -> Result<BevQueryGrid> {
    let spec = q.spec();
    if refs.spec() != spec {
        return Err(Error::Shape("reference points and queries use different grids".into()));
    }
    if mask.dims() != (spec.nx(), spec.ny()) {
        return Err(Error::Shape("mask does not match the query grid".into()));
    }
    if cameras.len() != features.len() {
        return Err(Error::Shape(format!(
            "{} cameras but {} feature maps",
            cameras.len(),
            features.len()
        )));
    }
    if let Some(f) = features.iter().find(|f| f.channels != q.channels) {
        return Err(Error::Shape(format!(
            "feature map has {} channels, queries have {}",
            f.channels, q.channels
        )));
    }
    let expected = spec.bev_len() * refs.n_z() * sampling.n_points;
    if sampling.n_z != refs.n_z() || sampling.offsets.len() != expected || sampling.weights.len() != expected {
        return Err(Error::Shape(format!(
            "sampling tables must hold {expected} entries ({} cells x {} samples x {} points)",
            spec.bev_len(),
            refs.n_z(),
            sampling.n_points
        )));
    }
    if sampling.weights.iter().any(|w| !w.is_finite()) || sampling.offsets.iter().flatten().any(|o| !o.is_finite()) {
        return Err(Error::Domain("weights and offsets must be finite".into()));
    }

    let mut out = q.data.clone();
    par::for_each_chunk_mut(&mut out, q.channels, |cell, acc| {
        if !mask.cell(cell) {
            return;
        }
        acc.fill(0.0);
        for (j, r) in refs.points(cell).enumerate() {
            for (cam, fm) in cameras.iter().zip(features) {
                let p = cam.project(&r);
                if !p.valid {
                    continue;
                }
                let (fu, fv) = (p.u * fm.scale, p.v * fm.scale);
                for k in 0..sampling.n_points {
                    let i = sampling.index(cell, j, k);
                    let [du, dv] = sampling.offsets[i];
                    accumulate_bilinear(fm, fu + du, fv + dv, sampling.weights[i], acc);
                }
            }
        }
    });
    Ok(BevQueryGrid {
        spec: *spec,
        channels: q.channels,
        data: out,
    })
}
