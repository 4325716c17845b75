//! Little-endian binary containers: 4-byte magic, `u32` version, payload.
//!
//! * points: `u64` count, then `count` x (x, y, z) `f32`
//! * height map: `u32` X, `u32` Y, then X*Y `f32` in BEV order, NaN = invalid
//! * voxels: `u32` X, Y, Z, then X*Y*Z `u8` in voxel order, 255 = free

use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::grid::{PointCloud, VoxelGridSpec};
use crate::heightmap::{first_unknown_label, HeightMap, SemanticVoxelGrid};

pub const VERSION: u32 = 1;
pub const POINTS_MAGIC: [u8; 4] = *b"HPRP";
pub const HEIGHTMAP_MAGIC: [u8; 4] = *b"HPRH";
pub const VOXELS_MAGIC: [u8; 4] = *b"HPRV";
pub const HEADER_LEN: usize = 8;

/// Bit pattern written for invalid height cells.
pub const INVALID_BITS: u32 = 0x7FC0_0000;

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let Some(end) = end else {
            return Err(Error::format(
                self.pos as u64,
                format!("truncated {what}: need {n} bytes, {} left", self.data.len() - self.pos),
            ));
        };
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn header(&mut self, magic: [u8; 4]) -> Result<()> {
        let m = self.take(4, "magic")?;
        if m != magic {
            return Err(Error::format(
                0,
                format!(
                    "expected magic {:?}, found {:?}",
                    String::from_utf8_lossy(&magic),
                    String::from_utf8_lossy(m)
                ),
            ));
        }
        let v = self.u32("version")?;
        if v != VERSION {
            return Err(Error::format(4, format!("unsupported version {v}")));
        }
        Ok(())
    }

    /// The rest of the file, which must be exactly `n` bytes.
    fn payload(&mut self, n: usize) -> Result<&'a [u8]> {
        let left = self.data.len() - self.pos;
        if left != n {
            return Err(Error::format(
                self.pos as u64,
                format!("payload is {left} bytes, expected {n}"),
            ));
        }
        self.take(n, "payload")
    }
}

fn header(magic: [u8; 4], payload: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload);
    out.extend_from_slice(&magic);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out
}

fn dim(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Range(format!("{what} dimension {n} exceeds u32")))
}

fn check_dims(found: &[u32], spec_dims: &[usize]) -> Result<()> {
    if found.iter().zip(spec_dims).any(|(&f, &s)| f as usize != s) {
        return Err(Error::Shape(format!(
            "file dimensions {found:?} do not match the grid {spec_dims:?}"
        )));
    }
    Ok(())
}

fn to_f32(v: f64, what: &str) -> Result<f32> {
    let f = v as f32;
    if !f.is_finite() {
        return Err(Error::Range(format!("{what} {v} is not representable as f32")));
    }
    Ok(f)
}

/// Coordinates are stored as `f32`.
pub fn encode_points(cloud: &PointCloud) -> Result<Vec<u8>> {
    let mut out = header(POINTS_MAGIC, 8 + 12 * cloud.len());
    out.extend_from_slice(&(cloud.len() as u64).to_le_bytes());
    for p in cloud.points() {
        for c in [p.x, p.y, p.z] {
            out.extend_from_slice(&to_f32(c, "coordinate")?.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_points(data: &[u8]) -> Result<PointCloud> {
    let mut r = Reader { data, pos: 0 };
    r.header(POINTS_MAGIC)?;
    let count = r.u64("point count")?;
    let start = r.pos;
    let len = usize::try_from(count)
        .ok()
        .and_then(|n| n.checked_mul(12))
        .ok_or_else(|| Error::format(8, format!("point count {count} is too large")))?;
    let payload = r.payload(len)?;
    let mut points = Vec::with_capacity(len / 12);
    for (i, chunk) in payload.chunks_exact(12).enumerate() {
        let c: [f32; 3] = std::array::from_fn(|k| f32::from_le_bytes(chunk[4 * k..4 * k + 4].try_into().unwrap()));
        if !c.iter().all(|v| v.is_finite()) {
            return Err(Error::format((start + 12 * i) as u64, format!("point {i} is not finite")));
        }
        points.push(Point3::new(c[0].into(), c[1].into(), c[2].into()));
    }
    PointCloud::new(points)
}

/// Heights are stored as `f32`; invalid cells as quiet NaN.
pub fn encode_heightmap(h: &HeightMap) -> Result<Vec<u8>> {
    let s = h.spec();
    let mut out = header(HEIGHTMAP_MAGIC, 8 + 4 * s.bev_len());
    out.extend_from_slice(&dim(s.nx(), "X")?.to_le_bytes());
    out.extend_from_slice(&dim(s.ny(), "Y")?.to_le_bytes());
    for cell in h.iter_cells() {
        let bits = match cell {
            Some(v) => to_f32(v, "height")?.to_bits(),
            None => INVALID_BITS,
        };
        out.extend_from_slice(&bits.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_heightmap(data: &[u8], spec: &VoxelGridSpec) -> Result<HeightMap> {
    let mut r = Reader { data, pos: 0 };
    r.header(HEIGHTMAP_MAGIC)?;
    let dims = [r.u32("X")?, r.u32("Y")?];
    check_dims(&dims, &[spec.nx(), spec.ny()])?;
    let start = r.pos;
    let payload = r.payload(4 * spec.bev_len())?;
    let mut cells = Vec::with_capacity(spec.bev_len());
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if v.is_nan() {
            cells.push(None);
        } else if v.is_infinite() {
            return Err(Error::format((start + 4 * i) as u64, format!("cell {i} is infinite")));
        } else {
            cells.push(Some(f64::from(v)));
        }
    }
    HeightMap::from_cells(*spec, cells)
}

pub fn encode_voxels(g: &SemanticVoxelGrid) -> Result<Vec<u8>> {
    let s = g.spec();
    let mut out = header(VOXELS_MAGIC, 12 + s.voxel_len());
    for (n, what) in [(s.nx(), "X"), (s.ny(), "Y"), (s.nz(), "Z")] {
        out.extend_from_slice(&dim(n, what)?.to_le_bytes());
    }
    out.extend_from_slice(g.labels());
    Ok(out)
}

/// Labels must be below `num_classes` or free.
pub fn decode_voxels(data: &[u8], spec: &VoxelGridSpec, num_classes: u8) -> Result<SemanticVoxelGrid> {
    let mut r = Reader { data, pos: 0 };
    r.header(VOXELS_MAGIC)?;
    let dims = [r.u32("X")?, r.u32("Y")?, r.u32("Z")?];
    check_dims(&dims, &[spec.nx(), spec.ny(), spec.nz()])?;
    let start = r.pos;
    let payload = r.payload(spec.voxel_len())?;
    if let Some(i) = first_unknown_label(payload, num_classes) {
        return Err(Error::format(
            (start + i) as u64,
            format!("label {} outside 0..{num_classes} and not free", payload[i]),
        ));
    }
    SemanticVoxelGrid::new(*spec, payload.to_vec(), num_classes)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_points(path: impl AsRef<Path>) -> Result<PointCloud> {
    decode_points(&read(path.as_ref())?)
}

pub fn write_points(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    write(path.as_ref(), &encode_points(cloud)?)
}

pub fn read_heightmap(path: impl AsRef<Path>, spec: &VoxelGridSpec) -> Result<HeightMap> {
    decode_heightmap(&read(path.as_ref())?, spec)
}

pub fn write_heightmap(path: impl AsRef<Path>, h: &HeightMap) -> Result<()> {
    write(path.as_ref(), &encode_heightmap(h)?)
}

pub fn read_voxels(path: impl AsRef<Path>, spec: &VoxelGridSpec, num_classes: u8) -> Result<SemanticVoxelGrid> {
    decode_voxels(&read(path.as_ref())?, spec, num_classes)
}

pub fn write_voxels(path: impl AsRef<Path>, g: &SemanticVoxelGrid) -> Result<()> {
    write(path.as_ref(), &encode_voxels(g)?)
}
