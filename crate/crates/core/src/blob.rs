//! Little-endian tensor container shared by checkpoints, spectrogram dumps
//! and relevance maps.
//!
//! Layout:
//!
//! ```text
//! magic "ALRPBLOB" | u32 version | str kind | str descriptor
//! | [32] sha256(descriptor) | u32 count
//! | count × (str name | u8 dtype | u32 ndim | ndim × u64 dim | raw values)
//! | [32] sha256(all preceding bytes)
//! ```
//!
//! `str` is a u32 byte length followed by UTF-8.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::{shape_len, DType, Real, Tensor};

pub const MAGIC: &[u8; 8] = b"ALRPBLOB";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Blob<F> {
    pub kind: String,
    pub descriptor: String,
    pub tensors: Vec<(String, Tensor<F>)>,
}

impl<F: Real> Blob<F> {
    pub fn get(&self, name: &str) -> Option<&Tensor<F>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

pub fn encode<F: Real>(kind: &str, descriptor: &str, tensors: &[(&str, &Tensor<F>)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_str(&mut out, kind);
    put_str(&mut out, descriptor);
    out.extend_from_slice(&Sha256::digest(descriptor.as_bytes()));
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        put_str(&mut out, name);
        out.push(F::DTYPE.tag());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            v.write_le(&mut out);
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
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
            .ok_or_else(|| Error::Corrupt("unexpected end of data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Corrupt("invalid UTF-8 string".into()))
    }
}

/// Decodes a container, converting stored values to `F`.
pub fn decode<F: Real>(bytes: &[u8]) -> Result<Blob<F>> {
    if bytes.len() < MAGIC.len() + 32 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Corrupt("not a tensor container (bad magic)".into()));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != trailer {
        return Err(Error::Corrupt("checksum mismatch (truncated or damaged)".into()));
    }
    let mut r = Reader {
        bytes: body,
        pos: MAGIC.len(),
    };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Corrupt(format!("unsupported format version {version}")));
    }
    let kind = r.string()?;
    let descriptor = r.string()?;
    if r.take(32)? != Sha256::digest(descriptor.as_bytes()).as_slice() {
        return Err(Error::Corrupt("architecture hash does not match descriptor".into()));
    }
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name = r.string()?;
        let dtype = DType::from_tag(r.u8()?)
            .ok_or_else(|| Error::Corrupt(format!("unknown dtype tag in `{name}`")))?;
        let ndim = r.u32()? as usize;
        let shape = (0..ndim)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n = shape_len(&shape);
        let raw = r.take(n.checked_mul(dtype.size()).ok_or_else(|| Error::Corrupt("size overflow".into()))?)?;
        let data: Vec<F> = match dtype {
            DType::F32 => raw.chunks_exact(4).map(|c| F::from_f64_lossy(f32::read_le(c) as f64)).collect(),
            DType::F64 => raw.chunks_exact(8).map(|c| F::from_f64_lossy(f64::read_le(c))).collect(),
        };
        let t = Tensor::new(shape, data).map_err(|e| Error::Corrupt(format!("`{name}`: {e}")))?;
        tensors.push((name, t));
    }
    if r.pos != body.len() {
        return Err(Error::Corrupt("trailing bytes after last tensor".into()));
    }
    Ok(Blob {
        kind,
        descriptor,
        tensors,
    })
}

/// Writes to a temporary sibling file, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{path:?} has no file name")))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}
