//! Packed binary codes, code databases and substring partitions.
//!
//! Bit `i` of a code lives in bit `i % 64` of word `i / 64` (LSB first).
//! Storage is padded to whole words and the padding bits are always zero, so
//! distances can be computed word by word without masking.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Longest supported code, in bits.
pub const MAX_CODE_BITS: usize = 4096;

/// Widest substring [`Partition::extract`] can return.
pub const MAX_EXTRACT_BITS: usize = 64;

/// Number of 64-bit words needed to hold `bits` bits.
#[inline]
pub const fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

fn check_bits(bits: usize) -> Result<()> {
    if bits == 0 || bits > MAX_CODE_BITS {
        return Err(Error::InvalidCodeLength { bits, max: MAX_CODE_BITS });
    }
    Ok(())
}

fn padding_mask(bits: usize) -> u64 {
    match bits % 64 {
        0 => 0,
        used => !0u64 << used,
    }
}

/// Hamming distance between two packed codes of equal word count.
#[inline]
pub fn word_distance(a: &[u64], b: &[u64]) -> u32 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// Reads `len <= 64` bits starting at bit `start`.
#[inline]
fn read_bits(words: &[u64], start: usize, len: usize) -> u64 {
    let w = start / 64;
    let off = start % 64;
    let mut v = words[w] >> off;
    if off != 0 && off + len > 64 {
        v |= words[w + 1] << (64 - off);
    }
    if len < 64 {
        v &= (1u64 << len) - 1;
    }
    v
}

/// A fixed-width bit vector.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryCode {
    bits: usize,
    words: Vec<u64>,
}

impl BinaryCode {
    pub fn zeros(bits: usize) -> Result<Self> {
        check_bits(bits)?;
        Ok(BinaryCode { bits, words: vec![0; words_for(bits)] })
    }

    /// Wraps packed words, rejecting a wrong word count or set padding bits.
    pub fn from_words(bits: usize, words: Vec<u64>) -> Result<Self> {
        check_bits(bits)?;
        let expected = words_for(bits);
        if words.len() != expected {
            return Err(Error::WordCount { expected, actual: words.len() });
        }
        if words[expected - 1] & padding_mask(bits) != 0 {
            return Err(Error::NonZeroPadding { bits });
        }
        Ok(BinaryCode { bits, words })
    }

    /// Parses a string of `0`/`1` written most significant bit first, so the
    /// last character is bit 0. `_` separators are ignored.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().filter(|&c| c != '_').collect();
        let mut code = Self::zeros(chars.len())?;
        for (i, &c) in chars.iter().rev().enumerate() {
            match c {
                '0' => {}
                '1' => code.set(i, true),
                other => return Err(Error::InvalidBitChar(other)),
            }
        }
        Ok(code)
    }

    pub fn from_bools(bits: &[bool]) -> Result<Self> {
        let mut code = Self::zeros(bits.len())?;
        for (i, &b) in bits.iter().enumerate() {
            code.set(i, b);
        }
        Ok(code)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.bits
    }

    /// Always false: codes have at least one bit.
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.bits, "bit {i} out of range for {} bits", self.bits);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.bits, "bit {i} out of range for {} bits", self.bits);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn complement(&self) -> Self {
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        let last = words.len() - 1;
        words[last] &= !padding_mask(self.bits);
        BinaryCode { bits: self.bits, words }
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Bit string, most significant bit first.
    pub fn to_bit_string(&self) -> String {
        (0..self.bits).rev().map(|i| if self.bit(i) { '1' } else { '0' }).collect()
    }
}

impl fmt::Debug for BinaryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryCode({})", self.to_bit_string())
    }
}

/// Number of bit positions at which `a` and `b` differ.
pub fn hamming_distance(a: &BinaryCode, b: &BinaryCode) -> Result<u32> {
    if a.bits != b.bits {
        return Err(Error::LengthMismatch { expected: a.bits, actual: b.bits });
    }
    Ok(word_distance(&a.words, &b.words))
}

/// `n` codes of a common length stored back to back. A code's id is its
/// insertion position.
#[derive(Clone, PartialEq, Eq)]
pub struct CodeDatabase {
    bits: usize,
    stride: usize,
    words: Vec<u64>,
}

impl CodeDatabase {
    /// Largest number of codes addressable with 32-bit ids.
    pub const MAX_CODES: usize = 1 << 32;

    pub fn new(bits: usize) -> Result<Self> {
        check_bits(bits)?;
        Ok(CodeDatabase { bits, stride: words_for(bits), words: Vec::new() })
    }

    pub fn with_capacity(bits: usize, n: usize) -> Result<Self> {
        let mut db = Self::new(bits)?;
        db.words.reserve(n * db.stride);
        Ok(db)
    }

    /// Builds a database from `n * words_for(bits)` packed words.
    pub fn from_words(bits: usize, words: Vec<u64>) -> Result<Self> {
        check_bits(bits)?;
        let stride = words_for(bits);
        if words.len() % stride != 0 {
            return Err(Error::WordCount {
                expected: words.len().next_multiple_of(stride),
                actual: words.len(),
            });
        }
        if words.len() / stride > Self::MAX_CODES {
            return Err(Error::TooManyCodes);
        }
        let pad = padding_mask(bits);
        if pad != 0 && words.chunks_exact(stride).any(|c| c[stride - 1] & pad != 0) {
            return Err(Error::NonZeroPadding { bits });
        }
        Ok(CodeDatabase { bits, stride, words })
    }

    pub fn push(&mut self, code: &BinaryCode) -> Result<u32> {
        if code.bits != self.bits {
            return Err(Error::LengthMismatch { expected: self.bits, actual: code.bits });
        }
        self.push_words(&code.words)
    }

    pub(crate) fn push_words(&mut self, words: &[u64]) -> Result<u32> {
        let id = self.len();
        if id >= Self::MAX_CODES {
            return Err(Error::TooManyCodes);
        }
        self.words.extend_from_slice(words);
        Ok(id as u32)
    }

    #[inline]
    pub fn bits(&self) -> usize {
        self.bits
    }

    /// Words per code.
    #[inline]
    pub fn stride(&self) -> usize {
        self.stride
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.words.len() / self.stride
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Packed words of code `id`.
    #[inline]
    pub fn code_words(&self, id: usize) -> &[u64] {
        &self.words[id * self.stride..(id + 1) * self.stride]
    }

    pub fn get(&self, id: usize) -> Option<BinaryCode> {
        (id < self.len())
            .then(|| BinaryCode { bits: self.bits, words: self.code_words(id).to_vec() })
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[u64]> + '_ {
        self.words.chunks_exact(self.stride)
    }

    pub fn as_words(&self) -> &[u64] {
        &self.words
    }

    pub fn into_words(self) -> Vec<u64> {
        self.words
    }

    pub(crate) fn check_query(&self, q: &BinaryCode) -> Result<()> {
        if q.bits != self.bits {
            return Err(Error::LengthMismatch { expected: self.bits, actual: q.bits });
        }
        Ok(())
    }
}

impl fmt::Debug for CodeDatabase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CodeDatabase")
            .field("bits", &self.bits)
            .field("len", &self.len())
            .finish()
    }
}

/// A maximal stretch of positions that are contiguous both in the code and in
/// the substring, so it can be copied with one shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Run {
    src: u32,
    dst: u32,
    len: u32,
}

/// Assignment of the `b` bit positions of a code to `m` disjoint substrings
/// whose lengths differ by at most one.
///
/// Bit `i` of substring `j` is the code bit at `substring(j)[i]`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Partition {
    bits: usize,
    substrings: Vec<Vec<u32>>,
    runs: Vec<Vec<Run>>,
}

impl Partition {
    /// Contiguous runs of bits; the first `b % m` substrings get the extra bit.
    pub fn consecutive(bits: usize, m: usize) -> Result<Self> {
        check_bits(bits)?;
        if m == 0 || m > bits {
            return Err(Error::InvalidPartition("need 1 <= m <= b"));
        }
        let mut start = 0;
        let substrings = balanced_lengths(bits, m)
            .map(|len| {
                let run: Vec<u32> = (start..start + len).map(|p| p as u32).collect();
                start += len;
                run
            })
            .collect();
        Ok(Self::new_unchecked(bits, substrings))
    }

    /// Validates an explicit assignment: every position in `0..bits` appears
    /// exactly once and substring lengths differ by at most one.
    pub fn from_substrings(bits: usize, substrings: Vec<Vec<u32>>) -> Result<Self> {
        check_bits(bits)?;
        let m = substrings.len();
        if m == 0 || m > bits {
            return Err(Error::InvalidPartition("need 1 <= m <= b"));
        }
        let mut seen = vec![false; bits];
        for &p in substrings.iter().flatten() {
            let p = p as usize;
            if p >= bits {
                return Err(Error::InvalidPartition("bit position out of range"));
            }
            if core::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidPartition("bit position assigned twice"));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidPartition("bit position not assigned"));
        }
        let min = substrings.iter().map(Vec::len).min().unwrap_or(0);
        let max = substrings.iter().map(Vec::len).max().unwrap_or(0);
        if max - min > 1 {
            return Err(Error::InvalidPartition("substring lengths differ by more than one"));
        }
        Ok(Self::new_unchecked(bits, substrings))
    }

    fn new_unchecked(bits: usize, substrings: Vec<Vec<u32>>) -> Self {
        let runs = substrings.iter().map(|s| runs_of(s)).collect();
        Partition { bits, substrings, runs }
    }

    #[inline]
    pub fn bits(&self) -> usize {
        self.bits
    }

    /// Number of substrings.
    #[inline]
    pub fn m(&self) -> usize {
        self.substrings.len()
    }

    #[inline]
    pub fn substring(&self, j: usize) -> &[u32] {
        &self.substrings[j]
    }

    pub fn substrings(&self) -> &[Vec<u32>] {
        &self.substrings
    }

    #[inline]
    pub fn substring_len(&self, j: usize) -> usize {
        self.substrings[j].len()
    }

    pub fn lengths(&self) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.substrings.iter().map(Vec::len)
    }

    /// Whether every substring is a contiguous ascending run.
    pub fn is_consecutive(&self) -> bool {
        self.runs.iter().all(|r| r.len() == 1)
    }

    /// Substring `j` of a packed code. No bounds checks beyond slicing.
    #[inline]
    pub fn extract(&self, words: &[u64], j: usize) -> u64 {
        let mut v = 0u64;
        for run in &self.runs[j] {
            v |= read_bits(words, run.src as usize, run.len as usize) << run.dst;
        }
        v
    }

    /// Fails if any substring is too wide to fit a `u64`.
    pub fn check_extractable(&self) -> Result<()> {
        match self.lengths().max() {
            Some(w) if w > MAX_EXTRACT_BITS => {
                Err(Error::SubstringTooWide { bits: w, max: MAX_EXTRACT_BITS })
            }
            _ => Ok(()),
        }
    }
}

/// Substring lengths for `m` balanced parts of `bits`, longer parts first.
pub fn balanced_lengths(bits: usize, m: usize) -> impl Iterator<Item = usize> {
    let (base, extra) = (bits / m, bits % m);
    (0..m).map(move |j| base + usize::from(j < extra))
}

fn runs_of(positions: &[u32]) -> Vec<Run> {
    let mut runs: Vec<Run> = Vec::new();
    for (dst, &src) in positions.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if r.src + r.len == src && r.len < 64 => r.len += 1,
            _ => runs.push(Run { src, dst: dst as u32, len: 1 }),
        }
    }
    runs
}

/// Substring `j` of `code` under partition `p`.
pub fn extract_substring(code: &BinaryCode, p: &Partition, j: usize) -> Result<u64> {
    if code.bits != p.bits {
        return Err(Error::LengthMismatch { expected: p.bits, actual: code.bits });
    }
    if j >= p.m() {
        return Err(Error::SubstringIndex { index: j, m: p.m() });
    }
    let width = p.substring_len(j);
    if width > MAX_EXTRACT_BITS {
        return Err(Error::SubstringTooWide { bits: width, max: MAX_EXTRACT_BITS });
    }
    Ok(p.extract(&code.words, j))
}
