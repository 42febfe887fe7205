//! Binary path dump.
//!
//! Layout: a 32-byte header (`b"MVPATHS\0"`, version `u32`, n_particles `u64`,
//! n_times `u64`, dim `u32`) followed by little-endian `f64` values in
//! particle × time × dim order.

use super::ParticleEnsemble;
use crate::error::{Error, Result};
use std::fs;
use std::io::Write;
use std::path::Path;

pub const MAGIC: [u8; 8] = *b"MVPATHS\0";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

pub fn paths_to_bytes(ens: &ParticleEnsemble) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + ens.paths.len() * 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(ens.n_particles as u64).to_le_bytes());
    out.extend_from_slice(&(ens.n_times() as u64).to_le_bytes());
    out.extend_from_slice(&(ens.dim as u32).to_le_bytes());
    for v in &ens.paths {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_paths(path: &Path, ens: &ParticleEnsemble) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&paths_to_bytes(ens))?;
    Ok(())
}

/// Decoded dump: `(n_particles, n_times, dim, values)`.
pub type PathDump = (usize, usize, usize, Vec<f64>);

pub fn paths_from_bytes(bytes: &[u8]) -> Result<PathDump> {
    if bytes.len() < HEADER_LEN || bytes[..8] != MAGIC {
        return Err(Error::Parse("not a path dump".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != VERSION {
        return Err(Error::Parse(format!("unsupported dump version {version}")));
    }
    let (n, nt, d) = (u64_at(12) as usize, u64_at(20) as usize, u32_at(28) as usize);
    let count = n
        .checked_mul(nt)
        .and_then(|v| v.checked_mul(d))
        .ok_or_else(|| Error::Parse("dump shape overflows".into()))?;
    if bytes.len() != HEADER_LEN + 8 * count {
        return Err(Error::Parse(format!(
            "dump holds {} payload bytes, expected {}",
            bytes.len() - HEADER_LEN,
            8 * count
        )));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((n, nt, d, values))
}

pub fn read_paths(path: &Path) -> Result<PathDump> {
    paths_from_bytes(&fs::read(path)?)
}
