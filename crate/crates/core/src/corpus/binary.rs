//! Binary embedding container.
//!
//! ```text
//! magic     4 bytes  "LNUP"
//! dim       u32 LE   bit 31 set => vectors are stored L2-normalized (index file)
//! count     u64 LE
//! count x { u16 LE id_len, id bytes (UTF-8),
//!           u16 LE identity_len, identity bytes (UTF-8),
//!           dim x f32 LE }
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{EmbeddingRecord, ImageId};
use crate::error::{Error, Result};

pub const BINARY_MAGIC: [u8; 4] = *b"LNUP";
const NORMALIZED_FLAG: u32 = 1 << 31;

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryContents {
    pub dim: usize,
    pub normalized: bool,
    pub records: Vec<EmbeddingRecord>,
}

pub fn write_binary(path: impl AsRef<Path>, dim: usize, normalized: bool, records: &[EmbeddingRecord]) -> Result<()> {
    let path = path.as_ref();
    if dim as u64 >= NORMALIZED_FLAG as u64 {
        return Err(Error::InvalidArgument(format!(
            "dimension {dim} too large for container"
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let header_dim = dim as u32 | if normalized { NORMALIZED_FLAG } else { 0 };
    w.write_all(&BINARY_MAGIC).map_err(io)?;
    w.write_all(&header_dim.to_le_bytes()).map_err(io)?;
    w.write_all(&(records.len() as u64).to_le_bytes()).map_err(io)?;
    for rec in records {
        if rec.vector.len() != dim {
            return Err(Error::DimensionMismatch {
                id: rec.image_id.to_string(),
                expected: dim,
                found: rec.vector.len(),
            });
        }
        write_str(&mut w, rec.image_id.as_str()).map_err(io)?;
        write_str(&mut w, &rec.identity_id).map_err(io)?;
        for x in &rec.vector {
            w.write_all(&x.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    let len = u16::try_from(s.len())
        .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "string longer than 65535 bytes"))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(s.as_bytes())
}

pub fn read_binary(path: impl AsRef<Path>) -> Result<BinaryContents> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let truncated = |what: &str| Error::malformed(path, 0, format!("truncated {what}"));

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| truncated("header"))?;
    if magic != BINARY_MAGIC {
        return Err(Error::malformed(path, 0, "bad magic"));
    }
    let header_dim = read_u32(&mut r).map_err(|_| truncated("header"))?;
    let count = read_u64(&mut r).map_err(|_| truncated("header"))?;
    let normalized = header_dim & NORMALIZED_FLAG != 0;
    let dim = (header_dim & !NORMALIZED_FLAG) as usize;

    // Cap the pre-allocation so a corrupt count cannot exhaust memory.
    let mut records = Vec::with_capacity(count.min(1 << 20) as usize);
    let mut buf = vec![0u8; dim * 4];
    for i in 0..count {
        let id = read_str(&mut r).map_err(|_| truncated(&format!("record {i}")))?;
        let identity = read_str(&mut r).map_err(|_| truncated(&format!("record {i}")))?;
        let id = ImageId::new(id).map_err(|e| Error::malformed(path, 0, format!("record {i}: {e}")))?;
        r.read_exact(&mut buf).map_err(|_| truncated(&format!("record {i}")))?;
        let vector = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        records.push(EmbeddingRecord {
            image_id: id,
            identity_id: identity,
            vector,
        });
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::malformed(path, 0, "trailing bytes after last record"));
    }
    Ok(BinaryContents {
        dim,
        normalized,
        records,
    })
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_str(r: &mut impl Read) -> std::io::Result<String> {
    let mut len = [0u8; 2];
    r.read_exact(&mut len)?;
    let mut bytes = vec![0u8; u16::from_le_bytes(len) as usize];
    r.read_exact(&mut bytes)?;
    String::from_utf8(bytes).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}
