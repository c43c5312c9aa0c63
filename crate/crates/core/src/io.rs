//! Little-endian container formats.
//!
//! | file    | header                                              | record            |
//! |---------|-----------------------------------------------------|-------------------|
//! | points  | `PLRP`, u32 version, u64 count                       | 5 x f32 x,y,z,i,t |
//! | labels  | `PLRL`, u32 version, u64 count                       | u32 packed label  |
//! | raster  | `PLRG`, u32 version, u8 kind, u32 H, u32 W           | row-major cells   |
//!
//! Raster kinds: 0 semantic (u16), 1 panoptic (u32), 2 affinity (u8),
//! 3 occupancy (u8, saturating at 255).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ClassId, Grid, PanopticLabel, Point};

pub const VERSION: u32 = 1;
pub const POINTS_MAGIC: [u8; 4] = *b"PLRP";
pub const LABELS_MAGIC: [u8; 4] = *b"PLRL";
pub const RASTER_MAGIC: [u8; 4] = *b"PLRG";
const COUNTED_HEADER: usize = 16;
const RASTER_HEADER: usize = 17;
const POINT_RECORD: u64 = 20;

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn read_f32(b: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn check_magic(bytes: &[u8], magic: [u8; 4]) -> Result<()> {
    let found = &bytes[..bytes.len().min(4)];
    if found != magic {
        return Err(Error::BadMagic {
            expected: magic,
            found: found.to_vec(),
        });
    }
    Ok(())
}

fn check_version(bytes: &[u8]) -> Result<()> {
    let v = read_u32(bytes, 4);
    if v != VERSION {
        return Err(Error::UnsupportedVersion {
            found: v,
            expected: VERSION,
        });
    }
    Ok(())
}

fn check_length(what: &'static str, actual: usize, expected: Option<u64>) -> Result<usize> {
    let actual = actual as u64;
    match expected {
        Some(e) if e == actual => Ok(e as usize),
        Some(e) if e < actual => Err(Error::TrailingData {
            what,
            expected: e,
            actual,
        }),
        // an overflowing count can never be satisfied by the bytes at hand
        e => Err(Error::Truncated {
            what,
            expected: e.unwrap_or(u64::MAX),
            actual,
        }),
    }
}

/// Validates a counted container and returns its record count.
fn counted_header(bytes: &[u8], magic: [u8; 4], record: u64, what: &'static str) -> Result<usize> {
    check_magic(bytes, magic)?;
    if bytes.len() < COUNTED_HEADER {
        return Err(Error::Truncated {
            what,
            expected: COUNTED_HEADER as u64,
            actual: bytes.len() as u64,
        });
    }
    check_version(bytes)?;
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let expected = count.checked_mul(record).and_then(|n| n.checked_add(COUNTED_HEADER as u64));
    check_length(what, bytes.len(), expected)?;
    Ok(count as usize)
}

fn counted_prefix(magic: [u8; 4], count: usize, payload: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(COUNTED_HEADER + payload);
    out.extend_from_slice(&magic);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(count as u64).to_le_bytes());
    out
}

pub fn encode_points(points: &[Point]) -> Vec<u8> {
    let mut out = counted_prefix(POINTS_MAGIC, points.len(), points.len() * POINT_RECORD as usize);
    for p in points {
        for v in [p.x, p.y, p.z, p.intensity, p.timestamp] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn point_at(bytes: &[u8], at: usize) -> Point {
    Point {
        x: read_f32(bytes, at),
        y: read_f32(bytes, at + 4),
        z: read_f32(bytes, at + 8),
        intensity: read_f32(bytes, at + 12),
        timestamp: read_f32(bytes, at + 16),
    }
}

pub fn decode_points(bytes: &[u8]) -> Result<Vec<Point>> {
    let n = counted_header(bytes, POINTS_MAGIC, POINT_RECORD, "points file")?;
    Ok((0..n).map(|i| point_at(bytes, COUNTED_HEADER + i * 20)).collect())
}

pub fn encode_labels(labels: &[PanopticLabel]) -> Vec<u8> {
    let mut out = counted_prefix(LABELS_MAGIC, labels.len(), labels.len() * 4);
    for l in labels {
        out.extend_from_slice(&l.0.to_le_bytes());
    }
    out
}

pub fn decode_labels(bytes: &[u8]) -> Result<Vec<PanopticLabel>> {
    let n = counted_header(bytes, LABELS_MAGIC, 4, "labels file")?;
    Ok((0..n)
        .map(|i| PanopticLabel(read_u32(bytes, COUNTED_HEADER + i * 4)))
        .collect())
}

pub fn write_points(path: impl AsRef<Path>, points: &[Point]) -> Result<()> {
    Ok(fs::write(path, encode_points(points))?)
}

pub fn read_points(path: impl AsRef<Path>) -> Result<Vec<Point>> {
    decode_points(&fs::read(path)?)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[PanopticLabel]) -> Result<()> {
    Ok(fs::write(path, encode_labels(labels))?)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<PanopticLabel>> {
    decode_labels(&fs::read(path)?)
}

/// Errors unless a labels sequence pairs with a points sequence.
pub fn check_pair(points: usize, labels: usize) -> Result<()> {
    if points != labels {
        return Err(Error::LengthMismatch {
            what: "labels file",
            expected: points,
            found: labels,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RasterKind {
    Semantic = 0,
    Panoptic = 1,
    Affinity = 2,
    Occupancy = 3,
}

impl RasterKind {
    pub fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0 => RasterKind::Semantic,
            1 => RasterKind::Panoptic,
            2 => RasterKind::Affinity,
            3 => RasterKind::Occupancy,
            _ => return Err(Error::UnknownRasterKind { code }),
        })
    }

    pub fn cell_bytes(self) -> u64 {
        match self {
            RasterKind::Semantic => 2,
            RasterKind::Panoptic => 4,
            RasterKind::Affinity | RasterKind::Occupancy => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RasterKind::Semantic => "semantic",
            RasterKind::Panoptic => "panoptic",
            RasterKind::Affinity => "affinity",
            RasterKind::Occupancy => "occupancy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Raster {
    Semantic(Grid<ClassId>),
    Panoptic(Grid<PanopticLabel>),
    Affinity(Grid<u8>),
    Occupancy(Grid<u8>),
}

impl Raster {
    pub fn occupancy(counts: &Grid<u32>) -> Self {
        Raster::Occupancy(counts.map(|c| c.min(255) as u8))
    }

    pub fn kind(&self) -> RasterKind {
        match self {
            Raster::Semantic(_) => RasterKind::Semantic,
            Raster::Panoptic(_) => RasterKind::Panoptic,
            Raster::Affinity(_) => RasterKind::Affinity,
            Raster::Occupancy(_) => RasterKind::Occupancy,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Raster::Semantic(g) => (g.h(), g.w()),
            Raster::Panoptic(g) => (g.h(), g.w()),
            Raster::Affinity(g) | Raster::Occupancy(g) => (g.h(), g.w()),
        }
    }

    fn wrong_kind(&self, want: RasterKind) -> Error {
        Error::InvalidInput(format!(
            "expected a {} raster, found {}",
            want.name(),
            self.kind().name()
        ))
    }

    pub fn into_semantic(self) -> Result<Grid<ClassId>> {
        match self {
            Raster::Semantic(g) => Ok(g),
            r => Err(r.wrong_kind(RasterKind::Semantic)),
        }
    }

    pub fn into_panoptic(self) -> Result<Grid<PanopticLabel>> {
        match self {
            Raster::Panoptic(g) => Ok(g),
            r => Err(r.wrong_kind(RasterKind::Panoptic)),
        }
    }

    pub fn into_affinity(self) -> Result<Grid<u8>> {
        match self {
            Raster::Affinity(g) => Ok(g),
            r => Err(r.wrong_kind(RasterKind::Affinity)),
        }
    }
}

pub fn encode_raster(raster: &Raster) -> Vec<u8> {
    let (h, w) = raster.shape();
    let mut out = Vec::with_capacity(RASTER_HEADER + h * w * raster.kind().cell_bytes() as usize);
    out.extend_from_slice(&RASTER_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(raster.kind() as u8);
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    match raster {
        Raster::Semantic(g) => g.as_slice().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        Raster::Panoptic(g) => g.as_slice().iter().for_each(|v| out.extend_from_slice(&v.0.to_le_bytes())),
        Raster::Affinity(g) | Raster::Occupancy(g) => out.extend_from_slice(g.as_slice()),
    }
    out
}

pub fn decode_raster(bytes: &[u8]) -> Result<Raster> {
    const WHAT: &str = "raster file";
    check_magic(bytes, RASTER_MAGIC)?;
    if bytes.len() < RASTER_HEADER {
        return Err(Error::Truncated {
            what: WHAT,
            expected: RASTER_HEADER as u64,
            actual: bytes.len() as u64,
        });
    }
    check_version(bytes)?;
    let kind = RasterKind::from_code(bytes[8])?;
    let (h, w) = (read_u32(bytes, 9) as u64, read_u32(bytes, 13) as u64);
    if h == 0 || w == 0 {
        return Err(Error::InvalidInput(format!("raster dimensions {h}x{w} must be positive")));
    }
    let expected = (h * w).checked_mul(kind.cell_bytes()).map(|n| n + RASTER_HEADER as u64);
    check_length(WHAT, bytes.len(), expected)?;
    let (h, w) = (h as usize, w as usize);
    let payload = &bytes[RASTER_HEADER..];
    Ok(match kind {
        RasterKind::Semantic => Raster::Semantic(Grid::from_vec(
            h,
            w,
            payload.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect(),
        )?),
        RasterKind::Panoptic => Raster::Panoptic(Grid::from_vec(
            h,
            w,
            payload
                .chunks_exact(4)
                .map(|c| PanopticLabel(u32::from_le_bytes(c.try_into().unwrap())))
                .collect(),
        )?),
        RasterKind::Affinity => {
            if let Some(i) = payload.iter().position(|&v| v > 1) {
                return Err(Error::InvalidInput(format!(
                    "affinity byte {} at offset {} is not 0 or 1",
                    payload[i],
                    RASTER_HEADER + i
                )));
            }
            Raster::Affinity(Grid::from_vec(h, w, payload.to_vec())?)
        }
        RasterKind::Occupancy => Raster::Occupancy(Grid::from_vec(h, w, payload.to_vec())?),
    })
}

pub fn write_raster(path: impl AsRef<Path>, raster: &Raster) -> Result<()> {
    Ok(fs::write(path, encode_raster(raster))?)
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<Raster> {
    decode_raster(&fs::read(path)?)
}

/// Layout of a headerless 5 x f32 point dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawLayout {
    /// x, y, z, intensity, timestamp
    Xyzit,
    /// x, y, z, intensity, ring; the ring index is dropped and timestamp set to 0
    Xyzir,
}

impl std::str::FromStr for RawLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xyzit" => Ok(RawLayout::Xyzit),
            "xyzir" => Ok(RawLayout::Xyzir),
            other => Err(Error::InvalidInput(format!("unknown raw layout `{other}`"))),
        }
    }
}

pub fn decode_raw(points: &[u8], labels: &[u8], layout: RawLayout) -> Result<(Vec<Point>, Vec<PanopticLabel>)> {
    if points.len() % POINT_RECORD as usize != 0 {
        return Err(Error::Ingestion(format!(
            "point dump of {} bytes is not a multiple of {POINT_RECORD}",
            points.len()
        )));
    }
    if labels.len() % 4 != 0 {
        return Err(Error::Ingestion(format!(
            "label dump of {} bytes is not a multiple of 4",
            labels.len()
        )));
    }
    let n = points.len() / POINT_RECORD as usize;
    if labels.len() / 4 != n {
        return Err(Error::Ingestion(format!(
            "{} labels for {n} points",
            labels.len() / 4
        )));
    }
    let pts = (0..n)
        .map(|i| {
            let mut p = point_at(points, i * 20);
            if layout == RawLayout::Xyzir {
                p.timestamp = 0.0;
            }
            p
        })
        .collect();
    let lbl = labels
        .chunks_exact(4)
        .map(|c| PanopticLabel(u32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    Ok((pts, lbl))
}

/// Reads headerless little-endian dumps (nuScenes-style `.bin` points and
/// u32 panoptic labels).
pub fn ingest_raw(
    points_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    layout: RawLayout,
) -> Result<(Vec<Point>, Vec<PanopticLabel>)> {
    decode_raw(&fs::read(points_path)?, &fs::read(labels_path)?, layout)
}
