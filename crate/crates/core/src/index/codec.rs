//! Binary index file.
//!
//! ```text
//! "DISCKIDX" | version: u32 LE | payload length: u64 LE | payload | crc32(payload): u32 LE
//! ```
//!
//! The payload is a sequence of LEB128 varints: the document count and ids,
//! then the feature count and, per feature in serialized order, its text and
//! delta-encoded postings.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::InvertedIndex;
use crate::feature::Feature;

pub const MAGIC: &[u8; 8] = b"DISCKIDX";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("not an index file (bad magic bytes)")]
    BadMagic,
    #[error("index format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("index file is truncated")]
    Truncated,
    #[error("index checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("index payload is corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    put_varint(out, bytes.len() as u64);
    out.extend_from_slice(bytes);
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn varint(&mut self) -> Result<u64, CodecError> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let byte = *self.buf.get(self.pos).ok_or(CodecError::Truncated)?;
            self.pos += 1;
            v |= u64::from(byte & 0x7f) << shift;
            if byte & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(CodecError::Corrupt("varint longer than 64 bits".into()))
    }

    fn len(&mut self) -> Result<usize, CodecError> {
        let n = self.varint()?;
        usize::try_from(n)
            .ok()
            .filter(|&n| n <= self.buf.len() - self.pos.min(self.buf.len()))
            .ok_or(CodecError::Truncated)
    }

    fn text(&mut self) -> Result<&'a str, CodecError> {
        let n = self.len()?;
        let bytes = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        std::str::from_utf8(bytes).map_err(|e| CodecError::Corrupt(e.to_string()))
    }
}

impl InvertedIndex {
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut payload = Vec::new();
        put_varint(&mut payload, self.doc_ids.len() as u64);
        for id in &self.doc_ids {
            put_bytes(&mut payload, id.as_bytes());
        }
        let features = self.features();
        put_varint(&mut payload, features.len() as u64);
        for f in features {
            put_bytes(&mut payload, f.as_str().as_bytes());
            let list = self.postings(f);
            put_varint(&mut payload, list.len() as u64);
            let mut prev = 0u32;
            for (i, &doc) in list.iter().enumerate() {
                let delta = if i == 0 { doc } else { doc - prev };
                put_varint(&mut payload, u64::from(delta));
                prev = doc;
            }
        }
        out.write_all(MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&(payload.len() as u64).to_le_bytes())?;
        out.write_all(&payload)?;
        out.write_all(&crc32fast::hash(&payload).to_le_bytes())?;
        out.flush()
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self, CodecError> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        Self::decode(&bytes)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(if MAGIC.starts_with(bytes) {
                CodecError::Truncated
            } else {
                CodecError::BadMagic
            });
        }
        let header = bytes.get(8..20).ok_or(CodecError::Truncated)?;
        let version = u32::from_le_bytes(header[..4].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(CodecError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let len = u64::from_le_bytes(header[4..].try_into().unwrap());
        let end = usize::try_from(len)
            .ok()
            .and_then(|n| n.checked_add(20))
            .ok_or(CodecError::Truncated)?;
        let payload = bytes.get(20..end).ok_or(CodecError::Truncated)?;
        let trailer = bytes.get(end..end + 4).ok_or(CodecError::Truncated)?;
        if bytes.len() > end + 4 {
            return Err(CodecError::Corrupt("trailing bytes after checksum".into()));
        }
        let stored = u32::from_le_bytes(trailer.try_into().unwrap());
        let computed = crc32fast::hash(payload);
        if stored != computed {
            return Err(CodecError::ChecksumMismatch { stored, computed });
        }

        let mut cur = Cursor { buf: payload, pos: 0 };
        let doc_count = cur.len()?;
        let mut doc_ids = Vec::with_capacity(doc_count);
        for _ in 0..doc_count {
            doc_ids.push(cur.text()?.to_string());
        }
        let feature_count = cur.len()?;
        let mut postings = HashMap::with_capacity(feature_count);
        for _ in 0..feature_count {
            let text = cur.text()?;
            let feature: Feature = text
                .parse()
                .map_err(|e| CodecError::Corrupt(format!("feature {text:?}: {e}")))?;
            let n = cur.len()?;
            let mut list = Vec::with_capacity(n);
            let mut prev: Option<u64> = None;
            for _ in 0..n {
                let delta = cur.varint()?;
                let doc = match prev {
                    None => delta,
                    Some(_) if delta == 0 => {
                        return Err(CodecError::Corrupt(format!("repeated posting in {text}")))
                    }
                    Some(p) => p + delta,
                };
                if doc >= doc_count as u64 {
                    return Err(CodecError::Corrupt(format!("posting {doc} out of range in {text}")));
                }
                list.push(doc as u32);
                prev = Some(doc);
            }
            if postings.insert(feature, list).is_some() {
                return Err(CodecError::Corrupt(format!("duplicate feature {text}")));
            }
        }
        if cur.pos != payload.len() {
            return Err(CodecError::Corrupt("unread payload bytes".into()));
        }
        Ok(Self::from_parts(postings, doc_ids))
    }
}

pub fn save_index(index: &InvertedIndex, path: impl AsRef<Path>) -> io::Result<()> {
    index.write_to(BufWriter::new(File::create(path)?))
}

pub fn load_index(path: impl AsRef<Path>) -> Result<InvertedIndex, CodecError> {
    InvertedIndex::read_from(BufReader::new(File::open(path)?))
}
