//! Per-sample vector snapshots: load, validate, persist, align.
//!
//! A snapshot holds one dense vector per training sample, tagged with the
//! representation space it was taken from (input embeddings or encoder
//! outputs). Two on-disk formats are supported:
//!
//! - JSONL: line 1 is a header object `{"dim", "space", "model_tag", "epoch"}`,
//!   every following line is `{"id", "vec"}`.
//! - Binary: magic `VDST`, version u32 LE (=1), space u8 (0=embedding,
//!   1=encoder), epoch u32 LE, dim u32 LE, count u64 LE, then per record
//!   id_len u32 LE, id bytes, dim f32 LE. The binary header carries no
//!   model tag; loading yields an empty tag and saving drops it.
//!
//! Vectors are held as f64 in memory regardless of on-disk width. A
//! `VectorSet` is immutable once constructed and safe to share across
//! threads; writers must be the only writer for their path.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BINARY_MAGIC: &[u8; 4] = b"VDST";
const BINARY_VERSION: u32 = 1;

/// Which representation a vector was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Embedding,
    Encoder,
}

impl Space {
    pub fn code(self) -> u8 {
        match self {
            Space::Embedding => 0,
            Space::Encoder => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Space::Embedding),
            1 => Some(Space::Encoder),
            _ => None,
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Space::Embedding => f.write_str("embedding"),
            Space::Encoder => f.write_str("encoder"),
        }
    }
}

impl std::str::FromStr for Space {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "embedding" => Ok(Space::Embedding),
            "encoder" => Ok(Space::Encoder),
            other => Err(Error::InvalidParameter(format!(
                "unknown space `{other}` (expected `embedding` or `encoder`)"
            ))),
        }
    }
}

/// One sample's vector. The dimension is fixed by the owning [`VectorSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorRecord {
    pub id: String,
    pub vec: Vec<f64>,
}

/// An ordered, validated collection of per-sample vectors from one space.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    space: Space,
    model_tag: String,
    epoch: u32,
    dim: usize,
    records: Vec<VectorRecord>,
    index: HashMap<String, usize>,
}

impl VectorSet {
    /// Validates and assembles a set: every record must match `dim`, carry a
    /// non-empty unique id, and contain only finite values.
    pub fn new(
        space: Space,
        model_tag: impl Into<String>,
        epoch: u32,
        dim: usize,
        records: Vec<VectorRecord>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::MalformedHeader("dim must be positive".into()));
        }
        let mut index = HashMap::with_capacity(records.len());
        for (pos, record) in records.iter().enumerate() {
            if record.id.is_empty() {
                return Err(Error::EmptyId(pos));
            }
            if record.vec.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: record.id.clone(),
                    expected: dim,
                    got: record.vec.len(),
                });
            }
            if record.vec.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue(record.id.clone()));
            }
            if index.insert(record.id.clone(), pos).is_some() {
                return Err(Error::DuplicateId(record.id.clone()));
            }
        }
        Ok(VectorSet {
            space,
            model_tag: model_tag.into(),
            epoch,
            dim,
            records,
            index,
        })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn model_tag(&self) -> &str {
        &self.model_tag
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records in load order (stable across save/load round-trips).
    pub fn records(&self) -> &[VectorRecord] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&VectorRecord> {
        self.index.get(id).map(|&pos| &self.records[pos])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }
}

/// On-disk encoding of a [`VectorSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Binary,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "binary" => Ok(Format::Binary),
            other => Err(Error::InvalidParameter(format!(
                "unknown format `{other}` (expected `jsonl` or `binary`)"
            ))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonlHeader {
    dim: usize,
    space: Space,
    model_tag: String,
    epoch: u32,
}

pub fn load_vector_set(path: impl AsRef<Path>, format: Format) -> Result<VectorSet> {
    let path = path.as_ref();
    match format {
        Format::Jsonl => load_jsonl(path),
        Format::Binary => load_binary(path),
    }
}

pub fn save_vector_set(set: &VectorSet, path: impl AsRef<Path>, format: Format) -> Result<()> {
    let path = path.as_ref();
    match format {
        Format::Jsonl => save_jsonl(set, path),
        Format::Binary => save_binary(set, path),
    }
}

/// Sniffs the on-disk format from the leading magic bytes.
pub fn detect_format(path: impl AsRef<Path>) -> Result<Format> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 4];
    match file.read_exact(&mut magic) {
        Ok(()) if &magic == BINARY_MAGIC => Ok(Format::Binary),
        _ => Ok(Format::Jsonl),
    }
}

fn load_jsonl(path: &Path) -> Result<VectorSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();

    let header_line = lines
        .next()
        .ok_or_else(|| Error::MalformedHeader(format!("{}: empty file", path.display())))?
        .map_err(|e| Error::io(path, e))?;
    let header: JsonlHeader = serde_json::from_str(&header_line).map_err(|e| {
        Error::MalformedHeader(format!("{}: invalid header line: {e}", path.display()))
    })?;

    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: VectorRecord = serde_json::from_str(&line).map_err(|e| {
            Error::MalformedHeader(format!("{}: line {}: {e}", path.display(), lineno + 2))
        })?;
        records.push(record);
    }
    VectorSet::new(
        header.space,
        header.model_tag,
        header.epoch,
        header.dim,
        records,
    )
}

fn save_jsonl(set: &VectorSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = JsonlHeader {
        dim: set.dim,
        space: set.space,
        model_tag: set.model_tag.clone(),
        epoch: set.epoch,
    };
    let write_err = |e| Error::io(path, e);
    serde_json::to_writer(&mut w, &header).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").map_err(write_err)?;
    for record in &set.records {
        serde_json::to_writer(&mut w, record).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(write_err)?;
    }
    w.flush().map_err(write_err)
}

fn load_binary(path: &Path) -> Result<VectorSet> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cursor = BinaryCursor::new(&bytes, path);

    let magic = cursor.take(4)?;
    if magic != BINARY_MAGIC {
        return Err(Error::MalformedHeader(format!(
            "{}: bad magic bytes {:?}",
            path.display(),
            magic
        )));
    }
    let version = cursor.u32()?;
    if version != BINARY_VERSION {
        return Err(Error::MalformedHeader(format!(
            "{}: unsupported version {version}",
            path.display()
        )));
    }
    let space = Space::from_code(cursor.u8()?).ok_or_else(|| {
        Error::MalformedHeader(format!("{}: invalid space code", path.display()))
    })?;
    let epoch = cursor.u32()?;
    let dim = cursor.u32()? as usize;
    let count = cursor.u64()? as usize;

    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let id_len = cursor.u32()? as usize;
        let id_bytes = cursor.take(id_len)?;
        let id = String::from_utf8(id_bytes.to_vec()).map_err(|_| {
            Error::MalformedHeader(format!(
                "{}: invalid UTF-8 id at byte {}",
                path.display(),
                cursor.offset - id_len
            ))
        })?;
        let mut vec = Vec::with_capacity(dim);
        for _ in 0..dim {
            vec.push(f64::from(cursor.f32()?));
        }
        records.push(VectorRecord { id, vec });
    }
    // The wire format has no model_tag field.
    VectorSet::new(space, String::new(), epoch, dim, records)
}

fn save_binary(set: &VectorSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write_err = |e| Error::io(path, e);

    w.write_all(BINARY_MAGIC).map_err(write_err)?;
    w.write_all(&BINARY_VERSION.to_le_bytes()).map_err(write_err)?;
    w.write_all(&[set.space.code()]).map_err(write_err)?;
    w.write_all(&set.epoch.to_le_bytes()).map_err(write_err)?;
    w.write_all(&(set.dim as u32).to_le_bytes()).map_err(write_err)?;
    w.write_all(&(set.records.len() as u64).to_le_bytes())
        .map_err(write_err)?;
    for record in &set.records {
        w.write_all(&(record.id.len() as u32).to_le_bytes())
            .map_err(write_err)?;
        w.write_all(record.id.as_bytes()).map_err(write_err)?;
        for &v in &record.vec {
            // narrows to f32 on disk
            w.write_all(&(v as f32).to_le_bytes()).map_err(write_err)?;
        }
    }
    w.flush().map_err(write_err)
}

struct BinaryCursor<'a> {
    bytes: &'a [u8],
    offset: usize,
    path: &'a Path,
}

impl<'a> BinaryCursor<'a> {
    fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        BinaryCursor {
            bytes,
            offset: 0,
            path,
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.offset + n > self.bytes.len() {
            return Err(Error::MalformedHeader(format!(
                "{}: truncated at byte {}",
                self.path.display(),
                self.offset
            )));
        }
        let slice = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(slice)
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

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// One sample present in both spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub id: String,
    pub emb: VectorRecord,
    pub enc: VectorRecord,
}

/// Result of aligning an embedding set against an encoder set. Ids present
/// in only one set are reported, not silently dropped.
#[derive(Debug, Clone)]
pub struct Alignment {
    /// Pairs sorted by id ascending (byte order).
    pub pairs: Vec<AlignedPair>,
    /// Ids only in the embedding set, sorted.
    pub only_emb: Vec<String>,
    /// Ids only in the encoder set, sorted.
    pub only_enc: Vec<String>,
}

/// Pairs up records shared by an embedding-space set and an encoder-space
/// set. Errors if either set has the wrong space tag or the id sets are
/// disjoint.
pub fn align_spaces(emb: &VectorSet, enc: &VectorSet) -> Result<Alignment> {
    if emb.space != Space::Embedding {
        return Err(Error::SpaceMismatch {
            expected: Space::Embedding,
            got: emb.space,
        });
    }
    if enc.space != Space::Encoder {
        return Err(Error::SpaceMismatch {
            expected: Space::Encoder,
            got: enc.space,
        });
    }

    let mut shared: Vec<&str> = Vec::new();
    let mut only_emb: Vec<String> = Vec::new();
    for id in emb.ids() {
        if enc.contains(id) {
            shared.push(id);
        } else {
            only_emb.push(id.to_string());
        }
    }
    let mut only_enc: Vec<String> = enc
        .ids()
        .filter(|id| !emb.contains(id))
        .map(str::to_string)
        .collect();

    if shared.is_empty() {
        return Err(Error::EmptyIntersection);
    }

    shared.sort_unstable();
    only_emb.sort_unstable();
    only_enc.sort_unstable();

    let pairs = shared
        .into_iter()
        .map(|id| AlignedPair {
            id: id.to_string(),
            emb: emb.get(id).expect("id from emb").clone(),
            enc: enc.get(id).expect("id checked in enc").clone(),
        })
        .collect();

    Ok(Alignment {
        pairs,
        only_emb,
        only_enc,
    })
}
