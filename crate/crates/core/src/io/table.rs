//! CSV tables with a fixed header row.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::{CameraModel, ReferencePointSet};

/// One reference point of a pillar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub ix: usize,
    pub iy: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// A reference point seen from one camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRow {
    pub ix: usize,
    pub iy: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub cam: usize,
    pub u: f64,
    pub v: f64,
    pub depth: f64,
    pub valid: bool,
}

/// Rows for every valid cell, in BEV order then bottom to top.
pub fn reference_rows(refs: &ReferencePointSet) -> Vec<ReferenceRow> {
    let spec = refs.spec();
    let mut rows = Vec::with_capacity(refs.valid_count() * refs.n_z());
    for cell in 0..spec.bev_len() {
        let (ix, iy) = spec.bev_coords(cell);
        for (j, p) in refs.points(cell).enumerate() {
            rows.push(ReferenceRow {
                ix,
                iy,
                j,
                x: p.x,
                y: p.y,
                z: p.z,
            });
        }
    }
    rows
}

/// Every row projected through every camera, point-major.
pub fn project_rows(rows: &[ReferenceRow], cameras: &[CameraModel]) -> Vec<ProjectionRow> {
    let mut out = Vec::with_capacity(rows.len() * cameras.len());
    for r in rows {
        let p = nalgebra::Point3::new(r.x, r.y, r.z);
        for (cam, c) in cameras.iter().enumerate() {
            let q = c.project(&p);
            out.push(ProjectionRow {
                ix: r.ix,
                iy: r.iy,
                j: r.j,
                x: r.x,
                y: r.y,
                z: r.z,
                cam,
                u: q.u,
                v: q.v,
                depth: q.depth,
                valid: q.valid,
            });
        }
    }
    out
}

pub fn write_csv_to<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(std::io::BufWriter::new(f), rows)
}

pub fn read_csv<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rd = csv::Reader::from_reader(std::io::BufReader::new(f));
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}
