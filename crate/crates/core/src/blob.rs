//! Versioned binary container shared by mappers, coresets and classifier
//! checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    "TMAP"
//! version  u32
//! kind     u32 length + UTF-8 bytes
//! header   u32 count + u64 values     (shapes, counts; not payload)
//! floats   u64 count + f32 values     (payload)
//! labels   u64 count + u32 values     (payload)
//! ```
//!
//! Permanent-memory accounting counts only the payload sections, four bytes
//! per value.

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TMAP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub kind: String,
    pub header: Vec<u64>,
    pub floats: Vec<f32>,
    pub labels: Vec<u32>,
}

impl Blob {
    pub fn new(kind: impl Into<String>) -> Self {
        Blob {
            kind: kind.into(),
            header: Vec::new(),
            floats: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn payload_bytes(&self) -> u64 {
        4 * (self.floats.len() as u64 + self.labels.len() as u64)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 8 * self.header.len() + self.payload_bytes() as usize);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.kind.len() as u32).to_le_bytes());
        out.extend_from_slice(self.kind.as_bytes());
        out.extend_from_slice(&(self.header.len() as u32).to_le_bytes());
        for h in &self.header {
            out.extend_from_slice(&h.to_le_bytes());
        }
        out.extend_from_slice(&(self.floats.len() as u64).to_le_bytes());
        for f in &self.floats {
            out.extend_from_slice(&f.to_le_bytes());
        }
        out.extend_from_slice(&(self.labels.len() as u64).to_le_bytes());
        for l in &self.labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::arg("blob: bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::arg(format!("blob: unsupported version {version}")));
        }
        let kind_len = r.u32()? as usize;
        let kind = std::str::from_utf8(r.take(kind_len)?)
            .map_err(|_| Error::arg("blob: kind is not UTF-8"))?
            .to_string();
        let n_header = r.u32()? as usize;
        let header = (0..n_header).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let n_floats = r.u64()? as usize;
        let floats = r
            .take(n_floats.checked_mul(4).ok_or_else(|| Error::arg("blob: length overflow"))?)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let n_labels = r.u64()? as usize;
        let labels = r
            .take(n_labels.checked_mul(4).ok_or_else(|| Error::arg("blob: length overflow"))?)?
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if r.pos != bytes.len() {
            return Err(Error::arg("blob: trailing bytes"));
        }
        Ok(Blob {
            kind,
            header,
            floats,
            labels,
        })
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::arg(format!("blob: expected kind {kind}, found {}", self.kind)))
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::arg("blob: truncated"))?;
        let s = &self.bytes[self.pos..end];
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
