//! Flat little-endian snapshot files.
//!
//! Layout:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8 | magic `VM15SNAP` |
//! | 6 x f64 | `x_min, x_max, v1_min, v1_max, v2_min, v2_max` |
//! | 3 x u64 | cell counts `n_x, n_v1, n_v2` |
//! | f64 | time |
//! | N x f64 | values, row-major `(i_x, i_v1, i_v2)`, `N = (n_x+1)(n_v1+1)(n_v2+1)` |
//! | u64 | 1 if a field block follows, else 0 |
//! | 4 x (n_x+1) x f64 | `E1, E2, B, A` |

use std::io::{Read, Write};
use std::path::Path;

use crate::distribution::DistributionFunction;
use crate::error::{Error, Result};
use crate::fields::FieldState;
use crate::grid::{Axis, PhaseGrid};

pub const MAGIC: &[u8; 8] = b"VM15SNAP";

pub fn write_snapshot<W: Write>(mut w: W, f: &DistributionFunction, fields: Option<&FieldState>) -> Result<()> {
    let g = f.grid;
    w.write_all(MAGIC)?;
    for a in [g.x, g.v1, g.v2] {
        w.write_all(&a.min.to_le_bytes())?;
        w.write_all(&a.max.to_le_bytes())?;
    }
    for a in [g.x, g.v1, g.v2] {
        w.write_all(&(a.cells as u64).to_le_bytes())?;
    }
    w.write_all(&f.time.to_le_bytes())?;
    write_f64s(&mut w, &f.values)?;
    match fields {
        Some(s) => {
            if s.axis != g.x {
                return Err(Error::GridMismatch("snapshot fields on a different axis".into()));
            }
            w.write_all(&1u64.to_le_bytes())?;
            for v in [&s.e1, &s.e2, &s.b, &s.a] {
                write_f64s(&mut w, v)?;
            }
        }
        None => w.write_all(&0u64.to_le_bytes())?,
    }
    Ok(())
}

fn write_f64s<W: Write>(w: &mut W, v: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(8 * v.len());
    for x in v {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Decoded snapshot. `fields` carries `E1, E2, B, A` when present.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub f: DistributionFunction,
    pub fields: Option<[Vec<f64>; 4]>,
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<Snapshot> {
    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a snapshot file (bad magic)".into()));
    }
    let mut ext = [0.0; 6];
    for e in &mut ext {
        *e = read_f64(&mut r)?;
    }
    let mut counts = [0usize; 3];
    for c in &mut counts {
        *c = usize::try_from(read_u64(&mut r)?).map_err(|_| Error::Format("count overflow".into()))?;
    }
    if counts.iter().any(|c| *c == 0 || *c > 1 << 24) {
        return Err(Error::Format(format!("implausible cell counts {counts:?}")));
    }
    let grid = PhaseGrid {
        x: Axis::new(ext[0], ext[1], counts[0]),
        v1: Axis::new(ext[2], ext[3], counts[1]),
        v2: Axis::new(ext[4], ext[5], counts[2]),
    };
    let time = read_f64(&mut r)?;
    let values = read_f64s(&mut r, grid.size())?;
    let fields = match read_u64(&mut r)? {
        0 => None,
        1 => {
            let n = grid.nx();
            Some([
                read_f64s(&mut r, n)?,
                read_f64s(&mut r, n)?,
                read_f64s(&mut r, n)?,
                read_f64s(&mut r, n)?,
            ])
        }
        flag => return Err(Error::Format(format!("bad field-block flag {flag}"))),
    };
    Ok(Snapshot {
        f: DistributionFunction { grid, values, time },
        fields,
    })
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated snapshot".into()),
        _ => Error::Io(e),
    })
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; 8 * n];
    read_exact(r, &mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn save(path: &Path, f: &DistributionFunction, fields: Option<&FieldState>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_snapshot(&mut w, f, fields)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Snapshot> {
    let file = std::fs::File::open(path)?;
    read_snapshot(std::io::BufReader::new(file))
}
