//! Synthetic CT-like volumes and a baseline air-segmentation pipeline.
//!
//! Values are Hounsfield-style `i16` units on a dense grid stored x-fastest
//! (index `x + nx*(y + ny*z)`). The phantom is a torso-like slab: a soft-
//! tissue box spanning the full z extent, two air ellipsoids for lungs, an
//! axis-aligned air tube entering from the top face (trachea), and an air
//! pocket below the lungs (bowel gas). The baseline segmenter thresholds air
//! and removes everything connected to the lateral faces, so outside air
//! disappears while interior air — lungs plus the two confounders — stays.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),
    #[error("{0}")]
    Format(String),
    #[error("mask dimensions {0:?} and {1:?} differ")]
    DimMismatch((usize, usize, usize), (usize, usize, usize)),
}

/// Dense `i16` voxel grid, x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub values: Vec<i16>,
}

impl VoxelGrid {
    pub fn new(nx: usize, ny: usize, nz: usize, fill: i16) -> Self {
        VoxelGrid { nx, ny, nz, values: vec![fill; nx * ny * nz] }
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> i16 {
        self.values[self.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: i16) {
        let i = self.index(x, y, z);
        self.values[i] = v;
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nz)
    }
}

/// Binary voxel mask over the same layout as [`VoxelGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Mask { nx, ny, nz, bits: vec![false; nx * ny * nz] }
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.bits[self.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: bool) {
        let i = self.index(x, y, z);
        self.bits[i] = v;
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nz)
    }

    /// Number of set voxels.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Inclusive voxel extents of an axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxExtents {
    pub x: (usize, usize),
    pub y: (usize, usize),
    pub z: (usize, usize),
}

impl BoxExtents {
    #[inline]
    fn contains(&self, x: usize, y: usize, z: usize) -> bool {
        x >= self.x.0 && x <= self.x.1 && y >= self.y.0 && y <= self.y.1 && z >= self.z.0 && z <= self.z.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    pub center: (f64, f64, f64),
    pub radii: (f64, f64, f64),
}

/// z-axis-aligned cylinder over an inclusive z range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub center_xy: (f64, f64),
    pub radius: f64,
    pub z: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: (f64, f64, f64),
    pub radius: f64,
}

/// Hounsfield-style levels painted into the phantom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuLevels {
    pub background: i16,
    pub body: i16,
    pub air: i16,
}

impl Default for HuLevels {
    fn default() -> Self {
        HuLevels { background: -1000, body: 40, air: -800 }
    }
}

/// Full description of the synthetic torso.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub dims: (usize, usize, usize),
    pub body: BoxExtents,
    pub lungs: [Ellipsoid; 2],
    pub trachea: Cylinder,
    pub bowel: Sphere,
    pub hu: HuLevels,
    /// Amplitude of the per-voxel surface jitter on curved shapes, in units
    /// of normalized radius. Zero keeps every surface analytic.
    pub surface_jitter: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            dims: (64, 64, 48),
            body: BoxExtents { x: (8, 55), y: (8, 55), z: (0, 47) },
            lungs: [
                Ellipsoid { center: (20.0, 31.0, 22.0), radii: (10.0, 12.0, 14.0) },
                Ellipsoid { center: (44.0, 31.0, 22.0), radii: (10.0, 12.0, 14.0) },
            ],
            trachea: Cylinder { center_xy: (32.0, 31.0), radius: 3.0, z: (30, 47) },
            bowel: Sphere { center: (32.0, 31.0, 9.0), radius: 7.0 },
            hu: HuLevels::default(),
            surface_jitter: 0.0,
            seed: 0,
        }
    }
}

/// Default HU threshold separating air from tissue.
pub const DEFAULT_AIR_THRESHOLD: i16 = -400;

// Paint precedence is background < body < air structure; the identity of a
// region id only matters for decorrelating jitter between shapes.
const SHAPE_LUNG_LEFT: u64 = 1;
const SHAPE_LUNG_RIGHT: u64 = 2;
const SHAPE_BOWEL: u64 = 3;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic per-voxel jitter in [-1, 1], independent of traversal order.
fn voxel_jitter(seed: u64, shape: u64, x: usize, y: usize, z: usize) -> f64 {
    let mut h = splitmix64(seed ^ shape.wrapping_mul(0xA24BAED4963EE407));
    h = splitmix64(h ^ (x as u64));
    h = splitmix64(h ^ (y as u64).wrapping_shl(20));
    h = splitmix64(h ^ (z as u64).wrapping_shl(40));
    (h >> 11) as f64 / ((1u64 << 53) as f64) * 2.0 - 1.0
}

impl PhantomSpec {
    /// The default geometry rescaled to arbitrary grid dimensions. Exactly
    /// reproduces [`PhantomSpec::default`] at 64x64x48; very small grids can
    /// fail validation once shapes round into the body boundary.
    pub fn for_dims(dims: (usize, usize, usize), seed: u64, surface_jitter: f64) -> Self {
        let (nx, ny, nz) = dims;
        let fx = nx as f64 / 64.0;
        let fy = ny as f64 / 64.0;
        let fz = nz as f64 / 48.0;
        let sx = |v: f64| v * fx;
        let sy = |v: f64| v * fy;
        let sz = |v: f64| v * fz;
        let lung = |cx: f64| Ellipsoid {
            center: (sx(cx), sy(31.0), sz(22.0)),
            radii: (sx(10.0), sy(12.0), sz(14.0)),
        };
        PhantomSpec {
            dims,
            body: BoxExtents {
                x: (sx(8.0).round() as usize, sx(55.0).round() as usize),
                y: (sy(8.0).round() as usize, sy(55.0).round() as usize),
                z: (0, nz.saturating_sub(1)),
            },
            lungs: [lung(20.0), lung(44.0)],
            trachea: Cylinder {
                center_xy: (sx(32.0), sy(31.0)),
                radius: 3.0 * fx.min(fy),
                z: (sz(30.0).round() as usize, nz.saturating_sub(1)),
            },
            bowel: Sphere {
                center: (sx(32.0), sy(31.0), sz(9.0)),
                radius: 7.0 * fx.min(fy).min(fz),
            },
            hu: HuLevels::default(),
            surface_jitter,
            seed,
        }
    }

    fn jittered_radius(&self, shape: u64, x: usize, y: usize, z: usize) -> f64 {
        if self.surface_jitter == 0.0 {
            1.0
        } else {
            1.0 + self.surface_jitter * voxel_jitter(self.seed, shape, x, y, z)
        }
    }

    fn in_ellipsoid(&self, e: &Ellipsoid, shape: u64, x: usize, y: usize, z: usize) -> bool {
        if e.radii.0 <= 0.0 || e.radii.1 <= 0.0 || e.radii.2 <= 0.0 {
            return false;
        }
        let dx = (x as f64 - e.center.0) / e.radii.0;
        let dy = (y as f64 - e.center.1) / e.radii.1;
        let dz = (z as f64 - e.center.2) / e.radii.2;
        let r = self.jittered_radius(shape, x, y, z);
        dx * dx + dy * dy + dz * dz <= r * r
    }

    fn in_sphere(&self, s: &Sphere, shape: u64, x: usize, y: usize, z: usize) -> bool {
        if s.radius <= 0.0 {
            return false;
        }
        let dx = (x as f64 - s.center.0) / s.radius;
        let dy = (y as f64 - s.center.1) / s.radius;
        let dz = (z as f64 - s.center.2) / s.radius;
        let r = self.jittered_radius(shape, x, y, z);
        dx * dx + dy * dy + dz * dz <= r * r
    }

    fn in_trachea(&self, x: usize, y: usize, z: usize) -> bool {
        if z < self.trachea.z.0 || z > self.trachea.z.1 || self.trachea.radius <= 0.0 {
            return false;
        }
        let dx = x as f64 - self.trachea.center_xy.0;
        let dy = y as f64 - self.trachea.center_xy.1;
        dx * dx + dy * dy <= self.trachea.radius * self.trachea.radius
    }

    fn in_lung(&self, x: usize, y: usize, z: usize) -> bool {
        self.in_ellipsoid(&self.lungs[0], SHAPE_LUNG_LEFT, x, y, z)
            || self.in_ellipsoid(&self.lungs[1], SHAPE_LUNG_RIGHT, x, y, z)
    }

    /// Whether any air-filled structure (lung, trachea, bowel gas) covers
    /// this voxel.
    pub fn in_air_structure(&self, x: usize, y: usize, z: usize) -> bool {
        self.in_lung(x, y, z) || self.in_trachea(x, y, z) || self.in_sphere(&self.bowel, SHAPE_BOWEL, x, y, z)
    }

    /// Check the geometric preconditions. The jitter amplitude is folded into
    /// the bounding extents so jittered surfaces cannot escape either.
    pub fn validate(&self) -> Result<(), VolumeError> {
        let (nx, ny, nz) = self.dims;
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(VolumeError::InvalidSpec("empty grid".into()));
        }
        if self.surface_jitter < 0.0 || !self.surface_jitter.is_finite() {
            return Err(VolumeError::InvalidSpec("surface jitter must be finite and non-negative".into()));
        }
        let b = &self.body;
        if b.x.0 > b.x.1 || b.y.0 > b.y.1 || b.z.0 > b.z.1 {
            return Err(VolumeError::InvalidSpec("body extents are inverted".into()));
        }
        if b.x.1 >= nx || b.y.1 >= ny || b.z.1 >= nz {
            return Err(VolumeError::InvalidSpec("body extends past the grid".into()));
        }
        // The body must sit strictly inside the lateral bounds so outside air
        // wraps around it; z faces may be touched (a torso cut by the scan).
        if b.x.0 < 1 || b.x.1 > nx - 2 || b.y.0 < 1 || b.y.1 > ny - 2 {
            return Err(VolumeError::InvalidSpec("body touches a lateral grid face".into()));
        }
        let slack = 1.0 + self.surface_jitter;
        for (i, lung) in self.lungs.iter().enumerate() {
            let (cx, cy, cz) = lung.center;
            let (rx, ry, rz) = lung.radii;
            if rx <= 0.0 || ry <= 0.0 || rz <= 0.0 {
                return Err(VolumeError::InvalidSpec(format!("lung {i} has a non-positive radius")));
            }
            let inside = cx - rx * slack > b.x.0 as f64
                && cx + rx * slack < b.x.1 as f64
                && cy - ry * slack > b.y.0 as f64
                && cy + ry * slack < b.y.1 as f64
                && cz - rz * slack > b.z.0 as f64
                && cz + rz * slack < b.z.1 as f64;
            if !inside {
                return Err(VolumeError::InvalidSpec(format!("lung {i} touches the body boundary")));
            }
        }
        let t = &self.trachea;
        if t.center_xy.0 - t.radius <= b.x.0 as f64
            || t.center_xy.0 + t.radius >= b.x.1 as f64
            || t.center_xy.1 - t.radius <= b.y.0 as f64
            || t.center_xy.1 + t.radius >= b.y.1 as f64
            || t.z.1 >= nz
        {
            return Err(VolumeError::InvalidSpec("trachea leaves the body laterally".into()));
        }
        let s = &self.bowel;
        if s.radius > 0.0 {
            let r = s.radius * slack;
            let inside = s.center.0 - r > b.x.0 as f64
                && s.center.0 + r < b.x.1 as f64
                && s.center.1 - r > b.y.0 as f64
                && s.center.1 + r < b.y.1 as f64
                && s.center.2 - r > b.z.0 as f64
                && s.center.2 + r < b.z.1 as f64;
            if !inside {
                return Err(VolumeError::InvalidSpec("bowel pocket touches the body boundary".into()));
            }
        }
        Ok(())
    }
}

/// Build the phantom grid and its ground-truth lung mask (the two lung
/// ellipsoids only; trachea and bowel gas are deliberately excluded, the way
/// manual lung contours would exclude them).
pub fn make_phantom(spec: &PhantomSpec) -> Result<(VoxelGrid, Mask), VolumeError> {
    spec.validate()?;
    let (nx, ny, nz) = spec.dims;
    let mut grid = VoxelGrid::new(nx, ny, nz, spec.hu.background);
    let mut truth = Mask::new(nx, ny, nz);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if !spec.body.contains(x, y, z) {
                    continue;
                }
                let lung = spec.in_lung(x, y, z);
                let air = spec.in_air_structure(x, y, z);
                grid.set(x, y, z, if air { spec.hu.air } else { spec.hu.body });
                if lung {
                    truth.set(x, y, z, true);
                }
            }
        }
    }
    Ok((grid, truth))
}

/// Mark every voxel strictly below `threshold` as air.
pub fn threshold_air(grid: &VoxelGrid, threshold: i16) -> Mask {
    let mut mask = Mask::new(grid.nx, grid.ny, grid.nz);
    for (i, &v) in grid.values.iter().enumerate() {
        mask.bits[i] = v < threshold;
    }
    mask
}

/// Drop every 6-connected component that touches a lateral face (x or y
/// boundary). Components touching only the z faces survive, which is what
/// lets a trachea that exits the top of the scan stay in the mask.
pub fn remove_external_air(mask: &Mask) -> Mask {
    let (nx, ny, nz) = mask.dims();
    let mut out = mask.clone();
    let mut visited = vec![false; mask.bits.len()];
    let mut component = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.bits.len() {
        if !mask.bits[start] || visited[start] {
            continue;
        }
        component.clear();
        stack.push(start);
        visited[start] = true;
        let mut touches_lateral = false;
        while let Some(i) = stack.pop() {
            component.push(i);
            let x = i % nx;
            let y = (i / nx) % ny;
            let z = i / (nx * ny);
            if x == 0 || x == nx - 1 || y == 0 || y == ny - 1 {
                touches_lateral = true;
            }
            let mut visit = |j: usize| {
                if mask.bits[j] && !visited[j] {
                    visited[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < nx {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - nx);
            }
            if y + 1 < ny {
                visit(i + nx);
            }
            if z > 0 {
                visit(i - nx * ny);
            }
            if z + 1 < nz {
                visit(i + nx * ny);
            }
        }
        if touches_lateral {
            for &i in &component {
                out.bits[i] = false;
            }
        }
    }
    out
}

/// Baseline segmentation: threshold air at the default level, then remove
/// everything connected to the outside.
pub fn segment_lung_proxy(grid: &VoxelGrid) -> Mask {
    segment_with_threshold(grid, DEFAULT_AIR_THRESHOLD)
}

/// [`segment_lung_proxy`] with an explicit air threshold.
pub fn segment_with_threshold(grid: &VoxelGrid, threshold: i16) -> Mask {
    remove_external_air(&threshold_air(grid, threshold))
}

fn parse_dims_header(text: &[u8], magic: &str) -> Result<((usize, usize, usize), usize), VolumeError> {
    let nl = text
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| VolumeError::Format("missing header line".into()))?;
    let header = std::str::from_utf8(&text[..nl])
        .map_err(|_| VolumeError::Format("header is not ASCII".into()))?;
    let mut parts = header.split_whitespace();
    let found = parts.next().unwrap_or("");
    if found != magic {
        return Err(VolumeError::Format(format!("bad magic: expected {magic}, found {found}")));
    }
    let mut dim = |name: &str| -> Result<usize, VolumeError> {
        parts
            .next()
            .ok_or_else(|| VolumeError::Format(format!("missing {name}")))?
            .parse()
            .map_err(|_| VolumeError::Format(format!("invalid {name}")))
    };
    let nx = dim("nx")?;
    let ny = dim("ny")?;
    let nz = dim("nz")?;
    Ok(((nx, ny, nz), nl + 1))
}

/// Serialize a volume: `MLPV1 nx ny nz\n` then little-endian `i16` values in
/// x-fastest order.
pub fn volume_to_bytes(grid: &VoxelGrid) -> Vec<u8> {
    let mut header = String::new();
    let _ = write!(header, "MLPV1 {} {} {}\n", grid.nx, grid.ny, grid.nz);
    let mut out = header.into_bytes();
    out.reserve(grid.values.len() * 2);
    for v in &grid.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn volume_from_bytes(bytes: &[u8]) -> Result<VoxelGrid, VolumeError> {
    let ((nx, ny, nz), offset) = parse_dims_header(bytes, "MLPV1")?;
    let n = nx
        .checked_mul(ny)
        .and_then(|v| v.checked_mul(nz))
        .ok_or_else(|| VolumeError::Format("dimension overflow".into()))?;
    let body = &bytes[offset..];
    if body.len() != n * 2 {
        return Err(VolumeError::Format(format!("expected {} value bytes, found {}", n * 2, body.len())));
    }
    let values = body.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])).collect();
    Ok(VoxelGrid { nx, ny, nz, values })
}

/// Serialize a mask: `MLPM1 nx ny nz\n` then the voxel bits packed eight per
/// byte, least-significant bit first, zero-padded in the final byte.
pub fn mask_to_bytes(mask: &Mask) -> Vec<u8> {
    let mut header = String::new();
    let _ = write!(header, "MLPM1 {} {} {}\n", mask.nx, mask.ny, mask.nz);
    let mut out = header.into_bytes();
    out.reserve(mask.bits.len().div_ceil(8));
    for chunk in mask.bits.chunks(8) {
        let mut byte = 0u8;
        for (bit, &b) in chunk.iter().enumerate() {
            if b {
                byte |= 1 << bit;
            }
        }
        out.push(byte);
    }
    out
}

pub fn mask_from_bytes(bytes: &[u8]) -> Result<Mask, VolumeError> {
    let ((nx, ny, nz), offset) = parse_dims_header(bytes, "MLPM1")?;
    let n = nx
        .checked_mul(ny)
        .and_then(|v| v.checked_mul(nz))
        .ok_or_else(|| VolumeError::Format("dimension overflow".into()))?;
    let body = &bytes[offset..];
    if body.len() != n.div_ceil(8) {
        return Err(VolumeError::Format(format!(
            "expected {} mask bytes, found {}",
            n.div_ceil(8),
            body.len()
        )));
    }
    let mut bits = Vec::with_capacity(n);
    for i in 0..n {
        bits.push(body[i / 8] & (1 << (i % 8)) != 0);
    }
    Ok(Mask { nx, ny, nz, bits })
}

pub fn write_volume(grid: &VoxelGrid, path: &Path) -> Result<(), VolumeError> {
    Ok(std::fs::write(path, volume_to_bytes(grid))?)
}

pub fn read_volume(path: &Path) -> Result<VoxelGrid, VolumeError> {
    volume_from_bytes(&std::fs::read(path)?)
}

pub fn write_mask(mask: &Mask, path: &Path) -> Result<(), VolumeError> {
    Ok(std::fs::write(path, mask_to_bytes(mask))?)
}

pub fn read_mask(path: &Path) -> Result<Mask, VolumeError> {
    mask_from_bytes(&std::fs::read(path)?)
}
