//! `EMB1` binary embedding cache.
//!
//! Little-endian layout, no padding:
//!
//! ```text
//! b"EMB1" | u32 dim | u32 count | u32 tag_len | tag bytes (UTF-8)
//! count x ( u16 id_len | id bytes (UTF-8) | dim x f32 )
//! ```
//!
//! Entries are written in sample-id order.

use std::path::Path;
use std::sync::Mutex;

use super::{EmbeddingError, EmbeddingSet, EmbeddingVector};

pub const MAGIC: &[u8; 4] = b"EMB1";

static WRITE_LOCK: Mutex<()> = Mutex::new(());

pub fn encode(set: &EmbeddingSet) -> Result<Vec<u8>, EmbeddingError> {
    let tag = set.provider_tag.as_bytes();
    let mut out = Vec::with_capacity(16 + tag.len() + set.len() * (2 + 16 + 4 * set.dim));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&u32_field(set.dim, "dim")?.to_le_bytes());
    out.extend_from_slice(&u32_field(set.len(), "count")?.to_le_bytes());
    out.extend_from_slice(&u32_field(tag.len(), "tag length")?.to_le_bytes());
    out.extend_from_slice(tag);
    for (id, v) in &set.entries {
        let len = u16::try_from(id.len()).map_err(|_| EmbeddingError::IdTooLong(id.clone()))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(id.as_bytes());
        for x in v.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

fn u32_field(n: usize, what: &str) -> Result<u32, EmbeddingError> {
    u32::try_from(n).map_err(|_| EmbeddingError::Format(format!("{what} {n} exceeds u32")))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], EmbeddingError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            EmbeddingError::Format(format!("truncated while reading {what} at byte {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16, EmbeddingError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, EmbeddingError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn utf8(&mut self, n: usize, what: &str) -> Result<String, EmbeddingError> {
        String::from_utf8(self.take(n, what)?.to_vec())
            .map_err(|_| EmbeddingError::Format(format!("{what} is not valid UTF-8")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<EmbeddingSet, EmbeddingError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(EmbeddingError::Format("bad magic, expected EMB1".into()));
    }
    let dim = r.u32("dim")? as usize;
    if dim == 0 {
        return Err(EmbeddingError::Format("dim is zero".into()));
    }
    let count = r.u32("count")? as usize;
    let tag_len = r.u32("tag length")? as usize;
    let provider_tag = r.utf8(tag_len, "provider tag")?;

    let mut set = EmbeddingSet::new(dim, provider_tag);
    for _ in 0..count {
        let id_len = r.u16("sample id length")? as usize;
        let id = r.utf8(id_len, "sample id")?;
        let raw = r.take(dim * 4, "vector")?;
        let values = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if set.entries.insert(id.clone(), EmbeddingVector::new(values)).is_some() {
            return Err(EmbeddingError::Format(format!("sample id `{id}` appears twice")));
        }
    }
    if r.pos != bytes.len() {
        return Err(EmbeddingError::Format(format!(
            "{} trailing bytes after {count} entries",
            bytes.len() - r.pos
        )));
    }
    Ok(set)
}

pub fn read_cache(path: &Path) -> Result<EmbeddingSet, EmbeddingError> {
    let bytes = std::fs::read(path).map_err(|e| EmbeddingError::io(path, e))?;
    decode(&bytes)
}

/// Writes atomically (temp file + rename); concurrent writers are serialised.
pub fn save_cache(set: &EmbeddingSet, path: &Path) -> Result<(), EmbeddingError> {
    let bytes = encode(set)?;
    let _guard = WRITE_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    crate::io::write_atomic(path, &bytes).map_err(|e| EmbeddingError::io(path, e))
}
