//! On-disk formats. Every integer is little-endian.
//!
//! Codes file:
//!
//! ```text
//! "BMIH"  version: u32 = 1  b: u32  n: u64
//! n records of ceil(b / 64) u64 words, bit i at word i / 64, bit i % 64
//! ```
//!
//! Index file:
//!
//! ```text
//! "BMIX"  version: u32 = 1  b: u32  n: u64
//! n code records, as in the codes file
//! m: u32, then per substring: len: u32, len bit positions (u32)
//! per table: key_bits: u32, groups: u64, groups occupancy masks (u32),
//!            buckets: u64, buckets + 1 offsets (u32), entries: u64, ids (u32)
//! ```
//!
//! Vector file:
//!
//! ```text
//! d: u32  n: u64  n * d f32 values, row-major
//! ```
//!
//! Partition files are JSON: `{"bits": b, "substrings": [[positions], ...]}`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use mih_core::codes::words_for;
use mih_core::table::group_count;
use mih_core::{CodeDatabase, MihIndex, Partition, SubstringTable};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const CODES_MAGIC: [u8; 4] = *b"BMIH";
pub const INDEX_MAGIC: [u8; 4] = *b"BMIX";
pub const FORMAT_VERSION: u32 = 1;

/// Size of the codes file header in bytes.
pub const CODES_HEADER_LEN: usize = 20;

/// Cursor over a byte buffer that reports positions in errors.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Reader { bytes, pos: 0, what }
    }

    fn offset(&self) -> u64 {
        self.pos as u64
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::Truncated {
                what: self.what,
                expected: self.pos as u64 + len as u64,
                actual: self.bytes.len() as u64,
            }),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// Reads a count and checks that `count * width` more bytes are present.
    fn count(&mut self, width: usize) -> Result<usize> {
        let at = self.offset();
        let count = self.u64()?;
        let needed = count.checked_mul(width as u64).unwrap_or(u64::MAX);
        let remaining = (self.bytes.len() - self.pos) as u64;
        if needed > remaining {
            return Err(Error::Truncated {
                what: self.what,
                expected: (self.pos as u64).saturating_add(needed),
                actual: self.bytes.len() as u64,
            });
        }
        usize::try_from(count).map_err(|_| Error::format(at, "count does not fit in memory"))
    }

    fn u32s(&mut self, count: usize) -> Result<Vec<u32>> {
        let bytes = self.take(count.checked_mul(4).unwrap_or(usize::MAX))?;
        Ok(bytes.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != expected {
            return Err(Error::format(0, format!("bad magic {got:?}, expected {expected:?}")));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::format(4, format!("unsupported version {version}")));
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(
                self.pos as u64,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::file(path, e))
}

fn create_file(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path).map(BufWriter::new).map_err(|e| Error::file(path, e))
}

fn put_u32s(w: &mut impl Write, values: impl IntoIterator<Item = u32>) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn put_code_block(w: &mut impl Write, db: &CodeDatabase) -> Result<()> {
    w.write_all(&(db.bits() as u32).to_le_bytes())?;
    w.write_all(&(db.len() as u64).to_le_bytes())?;
    for word in db.as_words() {
        w.write_all(&word.to_le_bytes())?;
    }
    Ok(())
}

/// Reads `b`, `n` and the code records that follow them.
fn get_code_block(r: &mut Reader<'_>) -> Result<CodeDatabase> {
    let bits_at = r.offset();
    let bits = r.u32()? as usize;
    let n = r.u64()?;
    let stride = words_for(bits);
    let payload_at = r.pos as u64;
    let payload = n.checked_mul(stride as u64 * 8).unwrap_or(u64::MAX);
    let available = (r.bytes.len() - r.pos) as u64;
    if payload > available {
        return Err(Error::Truncated {
            what: r.what,
            expected: payload_at.saturating_add(payload),
            actual: r.bytes.len() as u64,
        });
    }
    let bytes = r.take(payload as usize)?;
    let words: Vec<u64> =
        bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
    if bits % 64 != 0 && stride > 0 {
        let pad = !0u64 << (bits % 64);
        if let Some(i) = words.chunks_exact(stride).position(|c| c[stride - 1] & pad != 0) {
            let offset = payload_at + ((i * stride + stride - 1) * 8) as u64;
            return Err(Error::format(offset, format!("nonzero padding in code {i}")));
        }
    }
    CodeDatabase::from_words(bits, words)
        .map_err(|e| Error::format(bits_at, format!("invalid code block: {e}")))
}

pub fn encode_codes(db: &CodeDatabase, w: &mut impl Write) -> Result<()> {
    w.write_all(&CODES_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    put_code_block(w, db)
}

pub fn decode_codes(bytes: &[u8]) -> Result<CodeDatabase> {
    let mut r = Reader::new(bytes, "codes file");
    r.magic(CODES_MAGIC)?;
    let db = get_code_block(&mut r)?;
    r.finish()?;
    Ok(db)
}

pub fn write_codes(db: &CodeDatabase, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create_file(path)?;
    encode_codes(db, &mut w)?;
    w.flush().map_err(|e| Error::file(path, e))
}

pub fn read_codes(path: impl AsRef<Path>) -> Result<CodeDatabase> {
    decode_codes(&read_file(path.as_ref())?)
}

pub fn encode_index(index: &MihIndex, w: &mut impl Write) -> Result<()> {
    w.write_all(&INDEX_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    put_code_block(w, index.db())?;
    let partition = index.partition();
    w.write_all(&(partition.m() as u32).to_le_bytes())?;
    for sub in partition.substrings() {
        w.write_all(&(sub.len() as u32).to_le_bytes())?;
        put_u32s(w, sub.iter().copied())?;
    }
    for table in index.tables() {
        w.write_all(&table.key_bits().to_le_bytes())?;
        w.write_all(&(table.occupancy().len() as u64).to_le_bytes())?;
        put_u32s(w, table.occupancy())?;
        w.write_all(&((table.offsets().len() - 1) as u64).to_le_bytes())?;
        put_u32s(w, table.offsets().iter().copied())?;
        w.write_all(&(table.entries().len() as u64).to_le_bytes())?;
        put_u32s(w, table.entries().iter().copied())?;
    }
    Ok(())
}

/// Decodes an index, checking both table structure and that every id sits in
/// the bucket its code's substring selects.
pub fn decode_index(bytes: &[u8]) -> Result<MihIndex> {
    let mut r = Reader::new(bytes, "index file");
    r.magic(INDEX_MAGIC)?;
    let db = get_code_block(&mut r)?;

    let partition_at = r.offset();
    let m = r.u32()? as usize;
    if m == 0 || m > db.bits() {
        return Err(Error::format(partition_at, format!("invalid substring count {m}")));
    }
    let mut substrings = Vec::with_capacity(m);
    for _ in 0..m {
        let len_at = r.offset();
        let len = r.u32()? as usize;
        if len > db.bits() {
            return Err(Error::format(len_at, format!("substring of {len} bits")));
        }
        substrings.push(r.u32s(len)?);
    }
    let partition = Partition::from_substrings(db.bits(), substrings)
        .map_err(|e| Error::format(partition_at, e.to_string()))?;

    let mut tables = Vec::with_capacity(m);
    for j in 0..m {
        let table_at = r.offset();
        let key_bits = r.u32()?;
        if key_bits as usize != partition.substring_len(j) {
            return Err(Error::format(table_at, format!("table {j} has {key_bits}-bit keys")));
        }
        let groups_at = r.offset();
        let groups = r.count(4)?;
        if key_bits > mih_core::table::MAX_KEY_BITS || groups as u64 != group_count(key_bits) {
            return Err(Error::format(groups_at, format!("table {j} has {groups} groups")));
        }
        let occupancy = r.u32s(groups)?;
        let buckets = r.count(4)?;
        let offsets = r.u32s(buckets.saturating_add(1))?;
        let entries_at = r.offset();
        let len = r.count(4)?;
        if len != db.len() {
            return Err(Error::format(entries_at, format!("table {j} holds {len} ids")));
        }
        let entries = r.u32s(len)?;
        let table = SubstringTable::from_parts(key_bits, occupancy, offsets, entries, db.len())
            .map_err(|e| Error::format(table_at, format!("table {j}: {e}")))?;
        check_table_keys(&db, &partition, j, &table)
            .map_err(|message| Error::format(table_at, format!("table {j}: {message}")))?;
        tables.push(table);
    }
    r.finish()?;
    Ok(MihIndex::from_parts(db, partition, tables)?)
}

fn check_table_keys(
    db: &CodeDatabase,
    partition: &Partition,
    j: usize,
    table: &SubstringTable,
) -> std::result::Result<(), String> {
    let low = table.key_bits().min(mih_core::table::GROUP_BITS);
    let offsets = table.offsets();
    let mut rank = 0;
    for (g, mut mask) in table.occupancy().enumerate() {
        while mask != 0 {
            let key = ((g as u64) << low) | u64::from(mask.trailing_zeros());
            mask &= mask - 1;
            let ids = &table.entries()[offsets[rank] as usize..offsets[rank + 1] as usize];
            rank += 1;
            if let Some(&id) = ids.iter().find(|&&id| partition.extract(db.code_words(id as usize), j) != key) {
                return Err(format!("code {id} filed under bucket {key:#x}"));
            }
        }
    }
    Ok(())
}

pub fn write_index(index: &MihIndex, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create_file(path)?;
    encode_index(index, &mut w)?;
    w.flush().map_err(|e| Error::file(path, e))
}

pub fn read_index(path: impl AsRef<Path>) -> Result<MihIndex> {
    decode_index(&read_file(path.as_ref())?)
}

/// Dense real-valued vectors stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    dim: usize,
    data: Vec<f32>,
}

impl VectorSet {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 || dim > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!("vector dimension {dim}")));
        }
        if data.len() % dim != 0 {
            return Err(Error::Dimension { expected: data.len().next_multiple_of(dim), actual: data.len() });
        }
        Ok(VectorSet { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

pub fn encode_vectors(vectors: &VectorSet, w: &mut impl Write) -> Result<()> {
    w.write_all(&(vectors.dim as u32).to_le_bytes())?;
    w.write_all(&(vectors.len() as u64).to_le_bytes())?;
    for v in &vectors.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn decode_vectors(bytes: &[u8]) -> Result<VectorSet> {
    let mut r = Reader::new(bytes, "vector file");
    let dim = r.u32()? as usize;
    if dim == 0 {
        return Err(Error::format(0, "vector dimension 0"));
    }
    let n_at = r.offset();
    let n = r.u64()?;
    let count = n
        .checked_mul(dim as u64)
        .and_then(|c| usize::try_from(c).ok())
        .ok_or_else(|| Error::format(n_at, format!("{n} vectors do not fit in memory")))?;
    let payload_at = r.offset();
    let needed = count as u64 * 4;
    if needed > bytes.len() as u64 - payload_at {
        return Err(Error::Truncated {
            what: r.what,
            expected: payload_at + needed,
            actual: bytes.len() as u64,
        });
    }
    let data = r
        .take(count * 4)?
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    r.finish()?;
    VectorSet::new(dim, data)
}

pub fn write_vectors(vectors: &VectorSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create_file(path)?;
    encode_vectors(vectors, &mut w)?;
    w.flush().map_err(|e| Error::file(path, e))
}

pub fn read_vectors(path: impl AsRef<Path>) -> Result<VectorSet> {
    decode_vectors(&read_file(path.as_ref())?)
}

#[derive(Serialize, Deserialize)]
struct PartitionFile {
    bits: usize,
    substrings: Vec<Vec<u32>>,
}

pub fn write_partition(partition: &Partition, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = PartitionFile { bits: partition.bits(), substrings: partition.substrings().to_vec() };
    let mut w = create_file(path)?;
    serde_json::to_writer_pretty(&mut w, &file)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::file(path, e))
}

pub fn read_partition(path: impl AsRef<Path>) -> Result<Partition> {
    let bytes = read_file(path.as_ref())?;
    let file: PartitionFile = serde_json::from_slice(&bytes)?;
    Ok(Partition::from_substrings(file.bits, file.substrings)?)
}
