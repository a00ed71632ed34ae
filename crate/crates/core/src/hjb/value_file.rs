//! Binary persistence of [`GridValueFunction`].
//!
//! Layout (little-endian): magic `"MFRL1"`, version `u32`, `N`, `d`, `mesh`,
//! `n_t` as `u32`, `T` as `f64`, then `(n_t+1)·mesh^N` `f64` values in
//! row-major order (time slowest, particle 0 next, last particle fastest).

use std::io::{Read, Write};
use std::path::Path;

use super::fd::GridValueFunction;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"MFRL1";
pub const VERSION: u32 = 1;
const HEADER: usize = 5 + 4 * 5 + 8;

pub fn to_bytes(v: &GridValueFunction) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 8 * v.values().len());
    out.extend_from_slice(MAGIC);
    for x in [VERSION, v.n() as u32, 1, v.mesh() as u32, v.n_t() as u32] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out.extend_from_slice(&v.horizon.to_le_bytes());
    for x in v.values() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<GridValueFunction> {
    if bytes.len() < HEADER || &bytes[..5] != MAGIC {
        return Err(Error::Format("missing MFRL1 magic".into()));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[5 + 4 * k..9 + 4 * k].try_into().expect("4 bytes")) as usize;
    let (version, n, d, mesh, n_t) = (word(0), word(1), word(2), word(3), word(4));
    if version != VERSION as usize {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    if d != 1 {
        return Err(Error::Format(format!("value files are d=1, header says d={d}")));
    }
    let horizon = f64::from_le_bytes(bytes[25..33].try_into().expect("8 bytes"));
    let body = &bytes[HEADER..];
    if body.len() % 8 != 0 {
        return Err(Error::Format("truncated value array".into()));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    GridValueFunction::from_parts(n, mesh, n_t, horizon, values)
}

pub fn write_value_file(path: &Path, v: &GridValueFunction) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&to_bytes(v))?;
    f.flush()?;
    Ok(())
}

pub fn read_value_file(path: &Path) -> Result<GridValueFunction> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    from_bytes(&buf)
}
