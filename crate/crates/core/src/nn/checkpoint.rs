//! Versioned binary checkpoint with a JSON architecture sidecar.
//!
//! Blob layout (all integers little-endian):
//!
//! ```text
//! magic   b"TSCK"
//! version u32 (= 1)
//! count   u32
//! count × { name_len u32, name utf-8, ndim u32, dims u64 × ndim, values f64 × prod(dims) }
//! ```
//!
//! The sidecar lives next to the blob as `<file>.json`.

use std::fs;
use std::path::{Path, PathBuf};

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TSCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<(String, Tensor)>,
    pub architecture: serde_json::Value,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn encode(tensors: &[(String, &Tensor)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for d in t.shape() {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.buf.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }

    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
}

pub fn decode(buf: &[u8]) -> std::result::Result<Vec<(String, Tensor)>, String> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4) != Some(MAGIC.as_slice()) {
        return Err("bad magic".into());
    }
    let version = r.u32().ok_or("truncated header")?;
    if version != VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let count = r.u32().ok_or("truncated header")?;
    let mut tensors = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = r.u32().ok_or("truncated name")? as usize;
        let name = std::str::from_utf8(r.take(len).ok_or("truncated name")?)
            .map_err(|e| e.to_string())?
            .to_string();
        let ndim = r.u32().ok_or("truncated shape")? as usize;
        let shape = (0..ndim)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<Option<Vec<_>>>()
            .ok_or("truncated shape")?;
        let n: usize = shape.iter().product();
        let bytes = r.take(n * 8).ok_or("truncated values")?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push((name, Tensor::new(shape, data).map_err(|e| e.to_string())?));
    }
    if r.pos != buf.len() {
        return Err("trailing bytes".into());
    }
    Ok(tensors)
}

pub fn save_checkpoint(path: &Path, tensors: &[(String, &Tensor)], architecture: &serde_json::Value) -> Result<()> {
    fs::write(path, encode(tensors)).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(architecture).expect("json value serializes");
    fs::write(&side, json).map_err(|e| Error::io(&side, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    let tensors = decode(&buf).map_err(|m| Error::parse(path, m))?;
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let architecture = serde_json::from_str(&text).map_err(|e| Error::parse(&side, e.to_string()))?;
    Ok(Checkpoint { tensors, architecture })
}
