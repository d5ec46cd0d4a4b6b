//! Multi-channel cubic voxel grids and the VXGR binary container.

use std::io::{Read, Write};

use crate::error::{Result, VoxwalkError};

/// Geometry of a cubic voxel grid: `length` voxels per side at `resolution`
/// Å per voxel. `origin` is the center of voxel (0, 0, 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub length: usize,
    pub resolution: f32,
    pub channels: usize,
    pub origin: [f32; 3],
}

impl GridSpec {
    /// Grid centered at the coordinate origin, where the ligand centroid sits.
    pub fn centered(length: usize, resolution: f32, channels: usize) -> Result<GridSpec> {
        if length < 2 {
            return Err(VoxwalkError::Invalid(format!(
                "grid length must be >= 2, got {length}"
            )));
        }
        if !(resolution > 0.0) {
            return Err(VoxwalkError::Invalid(format!(
                "grid resolution must be > 0, got {resolution}"
            )));
        }
        let o = -resolution * (length as f32 - 1.0) / 2.0;
        Ok(GridSpec {
            length,
            resolution,
            channels,
            origin: [o, o, o],
        })
    }

    pub fn voxels_per_channel(&self) -> usize {
        self.length * self.length * self.length
    }

    pub fn total_voxels(&self) -> usize {
        self.channels * self.voxels_per_channel()
    }

    /// Coordinates of voxel (i, j, k)'s center in Å.
    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let r = self.resolution as f64;
        [
            self.origin[0] as f64 + r * i as f64,
            self.origin[1] as f64 + r * j as f64,
            self.origin[2] as f64 + r * k as f64,
        ]
    }

    pub fn flat_index(&self, c: usize, i: usize, j: usize, k: usize) -> usize {
        let l = self.length;
        ((c * l + i) * l + j) * l + k
    }

    /// Inverse of `flat_index`.
    pub fn unflatten(&self, idx: usize) -> (usize, usize, usize, usize) {
        let l = self.length;
        let k = idx % l;
        let j = (idx / l) % l;
        let i = (idx / (l * l)) % l;
        let c = idx / (l * l * l);
        (c, i, j, k)
    }

    pub fn same_geometry(&self, other: &GridSpec) -> bool {
        self.length == other.length
            && self.resolution == other.resolution
            && self.origin == other.origin
    }
}

/// Dense [channels, L, L, L] tensor of f32 voxel values.
///
/// Voxelizer output lies in [0, 1]; noisy grids are unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub spec: GridSpec,
    pub data: Vec<f32>,
}

impl VoxelGrid {
    pub fn zeros(spec: GridSpec) -> VoxelGrid {
        VoxelGrid {
            data: vec![0.0; spec.total_voxels()],
            spec,
        }
    }

    pub fn from_data(spec: GridSpec, data: Vec<f32>) -> Result<VoxelGrid> {
        if data.len() != spec.total_voxels() {
            return Err(VoxwalkError::ShapeMismatch(format!(
                "expected {} voxels, got {}",
                spec.total_voxels(),
                data.len()
            )));
        }
        Ok(VoxelGrid { spec, data })
    }

    pub fn get(&self, c: usize, i: usize, j: usize, k: usize) -> f32 {
        self.data[self.spec.flat_index(c, i, j, k)]
    }

    pub fn set(&mut self, c: usize, i: usize, j: usize, k: usize, v: f32) {
        let idx = self.spec.flat_index(c, i, j, k);
        self.data[idx] = v;
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.spec.voxels_per_channel();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn max_abs_diff(&self, other: &VoxelGrid) -> f32 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

const VXGR_MAGIC: &[u8; 4] = b"VXGR";
const VXGR_VERSION: u16 = 1;

/// Write a grid in the VXGR container: magic, version u16, channels u16,
/// L u32, resolution f32, origin 3xf32, then the f32 payload, little-endian.
pub fn write_vxgr<W: Write>(grid: &VoxelGrid, mut w: W) -> Result<()> {
    w.write_all(VXGR_MAGIC)?;
    w.write_all(&VXGR_VERSION.to_le_bytes())?;
    w.write_all(&(grid.spec.channels as u16).to_le_bytes())?;
    w.write_all(&(grid.spec.length as u32).to_le_bytes())?;
    w.write_all(&grid.spec.resolution.to_le_bytes())?;
    for o in grid.spec.origin {
        w.write_all(&o.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(grid.data.len() * 4);
    for v in &grid.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|_| VoxwalkError::Format("truncated VXGR stream".into()))?;
    Ok(buf)
}

pub fn read_vxgr<R: Read>(mut r: R) -> Result<VoxelGrid> {
    let magic: [u8; 4] = read_exact(&mut r)?;
    if &magic != VXGR_MAGIC {
        return Err(VoxwalkError::Format("bad VXGR magic".into()));
    }
    let version = u16::from_le_bytes(read_exact(&mut r)?);
    if version != VXGR_VERSION {
        return Err(VoxwalkError::Format(format!(
            "unsupported VXGR version {version}"
        )));
    }
    let channels = u16::from_le_bytes(read_exact(&mut r)?) as usize;
    let length = u32::from_le_bytes(read_exact(&mut r)?) as usize;
    let resolution = f32::from_le_bytes(read_exact(&mut r)?);
    let mut origin = [0.0f32; 3];
    for o in origin.iter_mut() {
        *o = f32::from_le_bytes(read_exact(&mut r)?);
    }
    let spec = GridSpec {
        length,
        resolution,
        channels,
        origin,
    };
    if length < 2 || !(resolution > 0.0) {
        return Err(VoxwalkError::Format("invalid VXGR grid geometry".into()));
    }
    let n = spec.total_voxels();
    let mut payload = vec![0u8; n * 4];
    r.read_exact(&mut payload)
        .map_err(|_| VoxwalkError::Format("truncated VXGR payload".into()))?;
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok(VoxelGrid { spec, data })
}

pub fn write_vxgr_file(grid: &VoxelGrid, path: &std::path::Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_vxgr(grid, std::io::BufWriter::new(f))
}

pub fn read_vxgr_file(path: &std::path::Path) -> Result<VoxelGrid> {
    let f = std::fs::File::open(path)?;
    read_vxgr(std::io::BufReader::new(f))
}
