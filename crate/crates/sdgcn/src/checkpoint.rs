//! Flat binary parameter container.
//!
//! Layout (all integers and floats little-endian):
//! `magic "SDGCNCKP"`, `u32 version`, `u64 entry count`, then per entry
//! `u32 name length`, UTF-8 name, `u32 rank`, `rank × u64` dimensions and the
//! values as `f64` in row-major order.

use std::path::Path;

use sdgcn_core::{ParamStore, Tensor};

use crate::container::{Reader, Writer};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SDGCNCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode(entries: &[(String, Tensor)]) -> Vec<u8> {
    let mut w = Writer::with_header(MAGIC, CHECKPOINT_VERSION, entries.len());
    for (name, t) in entries {
        w.str(name);
        w.u32(2);
        w.u64(t.rows() as u64);
        w.u64(t.cols() as u64);
        for &v in t.data() {
            w.f64(v);
        }
    }
    w.buf
}

pub fn decode(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let err = Error::Checkpoint;
    let mut r = Reader::new(bytes);
    let (version, count) = r.header(MAGIC).map_err(err)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let mut out = Vec::new();
    for _ in 0..count {
        let name = r.str().map_err(err)?;
        let rank = r.u32().map_err(err)?;
        let (rows, cols) = match rank {
            1 => (r.usize().map_err(err)?, 1),
            2 => (r.usize().map_err(err)?, r.usize().map_err(err)?),
            _ => return Err(Error::Checkpoint(format!("entry `{name}` has unsupported rank {rank}"))),
        };
        let n = rows
            .checked_mul(cols)
            .filter(|n| n.checked_mul(8).is_some())
            .ok_or_else(|| Error::Checkpoint(format!("entry `{name}` is too large")))?;
        let mut data = Vec::with_capacity(n.min(bytes.len() / 8));
        for _ in 0..n {
            data.push(r.f64().map_err(err)?);
        }
        out.push((name, Tensor::from_vec(rows, cols, data)?));
    }
    if !r.at_end() {
        return Err(Error::Checkpoint(format!("trailing bytes after offset {}", r.offset())));
    }
    Ok(out)
}

pub fn save(path: &Path, store: &ParamStore) -> Result<()> {
    save_entries(path, &store.snapshot())
}

pub fn save_entries(path: &Path, entries: &[(String, Tensor)]) -> Result<()> {
    std::fs::write(path, encode(entries)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Loads a checkpoint into `store`. Every entry of the store must be present
/// with the same shape.
pub fn restore(path: &Path, store: &mut ParamStore) -> Result<()> {
    let entries = load(path)?;
    for e in store.entries() {
        if !entries.iter().any(|(n, _)| n == e.name()) {
            return Err(Error::Checkpoint(format!("missing entry `{}`", e.name())));
        }
    }
    store.load_values(&entries).map_err(|e| Error::Checkpoint(e.to_string()))
}
