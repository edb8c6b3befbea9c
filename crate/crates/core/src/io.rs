//! Persistence: the PSHG binary grid format, CSV tables for plots, TOML
//! reports, and a machine-readable failure record.
//!
//! Layout of a grid file (all integers and floats little-endian):
//!
//!   magic "PSHG" · version u32 · n u32 · node counts u32 × 2n ·
//!   h f64 · origin f64 × 2n · classification u8 × ∏counts (0/1/2, row-major)
//!
//! A grid-function file appends f64 values in the same row-major order, with
//! NaN at exterior cells. Files are written atomically (temp file + rename)
//! so partial results never clobber good ones. Readers rebuild the full
//! neighbor table from the classification and reproduce the writer's
//! fingerprint bit for bit (files always use the default stencil family).

use crate::error::{Error, Result};
use crate::grid::{assemble_grid, Grid, GridFunction, EXTERIOR, INTERIOR};
use crate::stencil::StencilSet;
use serde::Serialize;
use std::fs;
use std::path::Path;
use std::sync::Arc;

const MAGIC: &[u8; 4] = b"PSHG";
const VERSION: u32 = 1;

/// Write bytes to `path` via a sibling temp file and an atomic rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn header_bytes(grid: &Grid) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + grid.class.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.n as u32).to_le_bytes());
    for &c in &grid.counts {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out.extend_from_slice(&grid.h.to_le_bytes());
    for &o in &grid.origin {
        out.extend_from_slice(&o.to_le_bytes());
    }
    out.extend_from_slice(&grid.class);
    out
}

pub fn write_grid(path: &Path, grid: &Grid) -> Result<()> {
    atomic_write(path, &header_bytes(grid))
}

pub fn write_grid_function(path: &Path, u: &GridFunction) -> Result<()> {
    let grid = &u.grid;
    let mut out = header_bytes(grid);
    out.reserve(8 * grid.class.len());
    for (cell, &id) in grid.node_of_cell.iter().enumerate() {
        let v = if id == crate::grid::NO_NODE {
            debug_assert_eq!(grid.class[cell], EXTERIOR);
            f64::NAN
        } else {
            u.vals[id as usize]
        };
        out.extend_from_slice(&v.to_le_bytes());
    }
    atomic_write(path, &out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn bytes(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.pos + k > self.buf.len() {
            return Err(Error::Format(format!(
                "file truncated: needed {k} bytes at offset {}, have {}",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

fn read_header(r: &mut Reader) -> Result<(usize, f64, Vec<f64>, Vec<u32>, Vec<u8>)> {
    if r.bytes(4)? != MAGIC {
        return Err(Error::Format("not a PSHG file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version} (expected {VERSION})"
        )));
    }
    let n = r.u32()? as usize;
    if n != 1 && n != 2 {
        return Err(Error::Format(format!("dimension n = {n} out of range")));
    }
    let axes = 2 * n;
    let mut counts = Vec::with_capacity(axes);
    for _ in 0..axes {
        counts.push(r.u32()?);
    }
    let h = r.f64()?;
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Format(format!("invalid spacing h = {h}")));
    }
    let mut origin = Vec::with_capacity(axes);
    for _ in 0..axes {
        let o = r.f64()?;
        if !o.is_finite() {
            return Err(Error::Format(format!("invalid origin coordinate {o}")));
        }
        origin.push(o);
    }
    let total: usize = counts.iter().map(|&c| c as usize).product();
    if total == 0 {
        return Err(Error::Format("empty lattice".into()));
    }
    let class = r.bytes(total)?.to_vec();
    if let Some(&bad) = class.iter().find(|&&b| b > EXTERIOR) {
        return Err(Error::Format(format!(
            "classification byte {bad} is not one of 0/1/2"
        )));
    }
    Ok((n, h, origin, counts, class))
}

pub fn read_grid(path: &Path) -> Result<Arc<Grid>> {
    let buf = fs::read(path)?;
    let mut r = Reader { buf: &buf, pos: 0 };
    let (n, h, origin, counts, class) = read_header(&mut r)?;
    if r.remaining() != 0 {
        return Err(Error::Format(format!(
            "{} trailing bytes after classification",
            r.remaining()
        )));
    }
    assemble_grid(n, h, origin, counts, StencilSet::default_for(n), class)
}

pub fn read_grid_function(path: &Path) -> Result<GridFunction> {
    let buf = fs::read(path)?;
    let mut r = Reader { buf: &buf, pos: 0 };
    let (n, h, origin, counts, class) = read_header(&mut r)?;
    let total = class.len();
    if r.remaining() != 8 * total {
        return Err(Error::Format(format!(
            "value block holds {} bytes, lattice needs {}",
            r.remaining(),
            8 * total
        )));
    }
    let grid = assemble_grid(n, h, origin, counts, StencilSet::default_for(n), class)?;
    let mut vals = vec![0.0f64; grid.node_count()];
    for cell in 0..total {
        let v = r.f64()?;
        let id = grid.node_of_cell[cell];
        if id == crate::grid::NO_NODE {
            continue;
        }
        if !v.is_finite() {
            return Err(Error::Format(format!(
                "non-finite value {v} at {} cell {cell}",
                if grid.class[cell] == INTERIOR { "interior" } else { "band" }
            )));
        }
        vals[id as usize] = v;
    }
    Ok(GridFunction { grid, vals })
}

/// Write one CSV table with a header row.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Format(e.to_string()))?;
    for row in rows {
        w.write_record(row).map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Format(e.to_string()))?;
    atomic_write(path, &bytes)
}

/// Serialize a report as TOML.
pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    atomic_write(path, text.as_bytes())
}

/// Machine-readable record of a failed run, written next to the partial
/// results before the process exits nonzero.
#[derive(Debug, Clone, Serialize)]
pub struct FailureRecord {
    pub command: String,
    pub message: String,
    pub failures: Vec<FailureItem>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureItem {
    pub name: String,
    pub detail: String,
}

pub fn write_failure_record(path: &Path, record: &FailureRecord) -> Result<()> {
    write_toml(path, record)
}
