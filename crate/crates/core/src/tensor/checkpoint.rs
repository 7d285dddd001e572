//! Binary parameter checkpoints.
//!
//! Layout: the ASCII magic `LDGCNCKPT1`, then for each parameter in store
//! order: `u32` name length, UTF-8 name, `u32` rank, `rank × u64` dims, and
//! `product(dims) × f64` values. All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 10] = b"LDGCNCKPT1";

pub fn encode(store: &ParamStore) -> Vec<u8> {
    let mut out = Vec::with_capacity(MAGIC.len() + store.num_scalars() * 8);
    out.extend_from_slice(MAGIC);
    for (_, name, value) in store.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(value.rank() as u32).to_le_bytes());
        for &d in value.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ParamStore> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let mut cur = Cursor {
        buf: bytes,
        pos: MAGIC.len(),
    };
    let mut store = ParamStore::new();
    while cur.pos < bytes.len() {
        let len = cur.u32()? as usize;
        let name = std::str::from_utf8(cur.take(len)?)
            .map_err(|e| Error::Checkpoint(format!("parameter name: {e}")))?
            .to_string();
        let rank = cur.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u64()? as usize);
        }
        let count = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::Checkpoint("shape overflow".into()))?;
        let raw = cur.take(
            count
                .checked_mul(8)
                .ok_or_else(|| Error::Checkpoint("shape overflow".into()))?,
        )?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
        store
            .add(name, t)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
    }
    Ok(store)
}

pub fn save(store: &ParamStore, path: &Path) -> Result<()> {
    fs::write(path, encode(store)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ParamStore> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Copies values from `loaded` into `target`, requiring the same names in
/// the same order with the same shapes.
pub fn restore_into(target: &mut ParamStore, loaded: &ParamStore) -> Result<()> {
    if target.len() != loaded.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} parameters, model expects {}",
            loaded.len(),
            target.len()
        )));
    }
    let ids: Vec<_> = target
        .iter()
        .map(|(id, name, _)| (id, name.to_string()))
        .collect();
    for ((id, name), (_, lname, value)) in ids.into_iter().zip(loaded.iter()) {
        if name != lname {
            return Err(Error::Checkpoint(format!(
                "expected `{name}`, found `{lname}`"
            )));
        }
        target
            .set(id, value.clone())
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
    }
    Ok(())
}
