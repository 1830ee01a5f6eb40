//! Binary checkpoints: a small header followed by little-endian f64 blobs.
//!
//! Layout: magic, u32 version, length-prefixed architecture string,
//! length-prefixed scenario hash, u64 epoch, then three length-prefixed
//! f64 blobs (parameters, optimizer state, auxiliary state such as the
//! reward baseline).

use crate::error::{QffError, Result};
use std::io::Write;
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"QFFCKPT\0";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub architecture: String,
    pub scenario_hash: String,
    pub epoch: u64,
    pub params: Vec<f64>,
    pub optimizer: Vec<f64>,
    pub aux: Vec<f64>,
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend((b.len() as u32).to_le_bytes());
    out.extend(b);
}

fn put_blob(out: &mut Vec<u8>, v: &[f64]) {
    out.extend((v.len() as u64).to_le_bytes());
    for x in v {
        out.extend(x.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| QffError::Checkpoint("truncated file".into()))?;
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

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| QffError::Checkpoint("invalid UTF-8 in header".into()))
    }

    fn blob(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| QffError::Checkpoint("blob too large".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 8 * (self.params.len() + self.optimizer.len() + self.aux.len()));
        out.extend(MAGIC);
        out.extend(VERSION.to_le_bytes());
        put_bytes(&mut out, self.architecture.as_bytes());
        put_bytes(&mut out, self.scenario_hash.as_bytes());
        out.extend(self.epoch.to_le_bytes());
        put_blob(&mut out, &self.params);
        put_blob(&mut out, &self.optimizer);
        put_blob(&mut out, &self.aux);
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(QffError::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(QffError::Checkpoint(format!("unsupported version {version}")));
        }
        let ck = Checkpoint {
            architecture: r.string()?,
            scenario_hash: r.string()?,
            epoch: r.u64()?,
            params: r.blob()?,
            optimizer: r.blob()?,
            aux: r.blob()?,
        };
        if r.pos != buf.len() {
            return Err(QffError::Checkpoint("trailing bytes".into()));
        }
        Ok(ck)
    }

    /// Write to a sibling temporary file, then rename over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let name = path.file_name().ok_or_else(|| QffError::Checkpoint(format!("not a file path: {}", path.display())))?;
        let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
