//! PSHF binary field files: `b"PSHF"`, then little-endian `u32` version, d, n,
//! n_t and rank code, then the `f64` payload in storage order.
//!
//! The header carries no spacings, so files read back onto the unit torus
//! unless a grid is supplied with [`read_field_on`].

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Grid, Rank, SpaceTimeField};
use crate::error::{Error, Result};
use crate::scalar::{cast, to_f64, Real};

const MAGIC: &[u8; 4] = b"PSHF";
const VERSION: u32 = 1;

pub fn write_field<T: Real>(f: &SpaceTimeField<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let g = f.grid();
    w.write_all(MAGIC)?;
    for v in [VERSION, g.d() as u32, g.n() as u32, g.n_t() as u32, f.rank().code()] {
        w.write_all(&v.to_le_bytes())?;
    }
    for &v in f.values() {
        w.write_all(&to_f64(v).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

struct Header {
    d: usize,
    n: usize,
    n_t: usize,
    rank: Rank,
}

fn read_header(r: &mut impl Read) -> Result<Header> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::Format("missing magic".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut words = [0u32; 5];
    for w in &mut words {
        let mut b = [0u8; 4];
        r.read_exact(&mut b).map_err(|_| Error::Format("header too short".into()))?;
        *w = u32::from_le_bytes(b);
    }
    if words[0] != VERSION {
        return Err(Error::Version(words[0]));
    }
    let rank = Rank::from_code(words[4])
        .ok_or_else(|| Error::Format(format!("unknown rank code {}", words[4])))?;
    Ok(Header { d: words[1] as usize, n: words[2] as usize, n_t: words[3] as usize, rank })
}

fn read_payload<T: Real>(r: &mut impl Read, grid: Grid<T>, rank: Rank) -> Result<SpaceTimeField<T>> {
    let len = grid.n_t() * grid.points() * rank.components(grid.d());
    let mut bytes = Vec::with_capacity(len * 8);
    r.take((len * 8) as u64 + 1).read_to_end(&mut bytes)?;
    if bytes.len() < len * 8 {
        return Err(Error::Truncated { expected: len * 8, found: bytes.len() });
    }
    if bytes.len() > len * 8 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| cast::<T>(f64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    SpaceTimeField::from_values(grid, rank, values)
}

/// Reads a field onto the unit torus described by its header.
pub fn read_field<T: Real>(path: impl AsRef<Path>) -> Result<SpaceTimeField<T>> {
    let mut r = BufReader::new(File::open(path)?);
    let h = read_header(&mut r)?;
    let grid = Grid::new(h.d, h.n, h.n_t)?;
    read_payload(&mut r, grid, h.rank)
}

/// Reads a field whose header must agree with `grid`.
pub fn read_field_on<T: Real>(path: impl AsRef<Path>, grid: &Grid<T>) -> Result<SpaceTimeField<T>> {
    let mut r = BufReader::new(File::open(path)?);
    let h = read_header(&mut r)?;
    if (h.d, h.n, h.n_t) != (grid.d(), grid.n(), grid.n_t()) {
        return Err(Error::GridMismatch(format!(
            "file has d={}, n={}, n_t={}",
            h.d, h.n, h.n_t
        )));
    }
    read_payload(&mut r, *grid, h.rank)
}
