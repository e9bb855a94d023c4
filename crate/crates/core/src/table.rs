//! Sparse direct-address tables keyed by substring value.
//!
//! Buckets are grouped 32 at a time. Each group carries a 32-bit occupancy
//! mask and the rank of its first non-empty bucket among all non-empty
//! buckets; ids of a bucket form one contiguous segment of `entries`,
//! delimited by `offsets`. Locating a bucket is a mask test and a popcount.
//!
//! Tables narrower than 5 bits use a single group of `2^s` buckets.
//!
//! Probing a ball or ring factors each key into its group bits and its 5 low
//! bits: the low part of the ball is a precomputed mask over the group, so each
//! group is read at most once however many of its buckets are in range. A
//! one-bit-per-group summary lets sparse tables skip empty groups without
//! touching the group array.

use alloc::vec;
use alloc::vec::Vec;

use crate::enumerate::FlipMasks;
use crate::{Error, Result};

/// log2 of the number of buckets per group.
pub const GROUP_BITS: u32 = 5;

/// Widest key a table accepts. A 32-bit table has `2^27` groups.
pub const MAX_KEY_BITS: u32 = 32;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[repr(C)]
struct Group {
    occupancy: u32,
    /// Rank of this group's first non-empty bucket.
    first: u32,
}

#[derive(Clone, PartialEq, Eq)]
pub struct SubstringTable {
    key_bits: u32,
    low_bits: u32,
    groups: Vec<Group>,
    used: Vec<u64>,
    offsets: Vec<u32>,
    entries: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableStats {
    pub key_bits: u32,
    pub groups: u64,
    pub non_empty_groups: u64,
    pub non_empty_buckets: u64,
    pub max_bucket_size: u64,
    pub total_entries: u64,
    pub estimated_bytes: u64,
}

/// Number of bucket groups in a table with `key_bits`-bit keys.
pub fn group_count(key_bits: u32) -> u64 {
    1 << key_bits.saturating_sub(GROUP_BITS)
}

/// Memory estimate for a grouped table: a 64-bit pointer and a 32-bit mask
/// per group, three 32-bit bookkeeping words per group that holds data, one
/// 32-bit segment start per non-empty bucket and one 32-bit id per entry.
pub fn estimated_table_bytes(
    key_bits: u32,
    non_empty_groups: u64,
    non_empty_buckets: u64,
    entries: u64,
) -> u64 {
    group_count(key_bits) * (8 + 4) + non_empty_groups * 12 + non_empty_buckets * 4 + entries * 4
}

fn check_key_bits(key_bits: u32) -> Result<()> {
    if key_bits > MAX_KEY_BITS {
        return Err(Error::SubstringTooWide { bits: key_bits as usize, max: MAX_KEY_BITS as usize });
    }
    Ok(())
}

/// `rings[t]` has bit `v` set when low value `v` is at distance `t` from `center`.
fn low_rings(center: u32, low_bits: u32) -> [u32; GROUP_BITS as usize + 1] {
    let mut rings = [0u32; GROUP_BITS as usize + 1];
    for v in 0..1u32 << low_bits {
        rings[(v ^ center).count_ones() as usize] |= 1 << v;
    }
    rings
}

impl SubstringTable {
    /// Builds a table from `(key, id)` pairs; a bucket lists its ids in input order.
    pub fn build(key_bits: u32, pairs: impl IntoIterator<Item = (u64, u32)>) -> Result<Self> {
        check_key_bits(key_bits)?;
        let mut ids = Vec::new();
        let mut packed = Vec::new();
        for (seq, (key, id)) in pairs.into_iter().enumerate() {
            if key >> key_bits != 0 {
                return Err(Error::ValueOutOfRange { value: key, bits: key_bits });
            }
            if seq > u32::MAX as usize {
                return Err(Error::TooManyCodes);
            }
            packed.push(key << 32 | seq as u64);
            ids.push(id);
        }
        Ok(Self::from_sorted(key_bits, packed, |seq| ids[seq as usize]))
    }

    /// Builds a table where the id of `keys[i]` is `i`.
    pub fn from_keys(key_bits: u32, keys: &[u64]) -> Result<Self> {
        check_key_bits(key_bits)?;
        if keys.len() > 1 << 32 {
            return Err(Error::TooManyCodes);
        }
        let mut packed = Vec::with_capacity(keys.len());
        for (i, &key) in keys.iter().enumerate() {
            if key >> key_bits != 0 {
                return Err(Error::ValueOutOfRange { value: key, bits: key_bits });
            }
            packed.push(key << 32 | i as u64);
        }
        Ok(Self::from_sorted(key_bits, packed, |seq| seq))
    }

    /// `packed` holds `key << 32 | seq`; sorting it orders by key, then by seq.
    fn from_sorted(key_bits: u32, mut packed: Vec<u64>, id_of: impl Fn(u32) -> u32) -> Self {
        packed.sort_unstable();
        let low_bits = key_bits.min(GROUP_BITS);
        let mut groups = vec![Group::default(); group_count(key_bits) as usize];
        let mut offsets = Vec::new();
        let mut entries = Vec::with_capacity(packed.len());
        let mut prev = None;
        for &p in &packed {
            let key = p >> 32;
            if prev != Some(key) {
                prev = Some(key);
                offsets.push(entries.len() as u32);
                groups[(key >> low_bits) as usize].occupancy |= 1 << (key & 31);
            }
            entries.push(id_of(p as u32));
        }
        offsets.push(entries.len() as u32);
        drop(packed);
        let mut table = SubstringTable { key_bits, low_bits, groups, used: Vec::new(), offsets, entries };
        table.index_groups();
        table
    }

    /// Fills group ranks and the summary bitmap from the occupancy masks.
    fn index_groups(&mut self) {
        self.used = vec![0u64; self.groups.len().div_ceil(64)];
        let mut rank = 0u32;
        for (g, group) in self.groups.iter_mut().enumerate() {
            group.first = rank;
            if group.occupancy != 0 {
                rank += group.occupancy.count_ones();
                self.used[g / 64] |= 1 << (g % 64);
            }
        }
    }

    /// Reassembles a table from its serialized parts, checking every
    /// structural invariant. Ids must be distinct and below `id_limit`.
    pub fn from_parts(
        key_bits: u32,
        occupancy: Vec<u32>,
        offsets: Vec<u32>,
        entries: Vec<u32>,
        id_limit: usize,
    ) -> Result<Self> {
        check_key_bits(key_bits)?;
        let low_bits = key_bits.min(GROUP_BITS);
        if occupancy.len() as u64 != group_count(key_bits) {
            return Err(Error::CorruptTable("group count does not match key width"));
        }
        if low_bits < GROUP_BITS {
            let valid = (1u64 << (1 << low_bits)) - 1;
            if u64::from(occupancy[0]) & !valid != 0 {
                return Err(Error::CorruptTable("occupancy bit beyond key range"));
            }
        }
        let buckets: u64 = occupancy.iter().map(|o| u64::from(o.count_ones())).sum();
        if offsets.len() as u64 != buckets + 1 {
            return Err(Error::CorruptTable("offset count does not match occupancy"));
        }
        if offsets[0] != 0 || *offsets.last().unwrap() as usize != entries.len() {
            return Err(Error::CorruptTable("offsets do not span the entries"));
        }
        if offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::CorruptTable("offsets not strictly increasing"));
        }
        let mut seen = vec![0u64; id_limit.div_ceil(64)];
        for &id in &entries {
            let id = id as usize;
            if id >= id_limit {
                return Err(Error::CorruptTable("id out of range"));
            }
            if seen[id / 64] >> (id % 64) & 1 == 1 {
                return Err(Error::CorruptTable("duplicate id"));
            }
            seen[id / 64] |= 1 << (id % 64);
        }
        let groups = occupancy.into_iter().map(|occupancy| Group { occupancy, first: 0 }).collect();
        let mut table = SubstringTable { key_bits, low_bits, groups, used: Vec::new(), offsets, entries };
        table.index_groups();
        Ok(table)
    }

    #[inline]
    pub fn key_bits(&self) -> u32 {
        self.key_bits
    }

    /// Total number of ids stored.
    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn occupancy(&self) -> impl ExactSizeIterator<Item = u32> + '_ {
        self.groups.iter().map(|g| g.occupancy)
    }

    pub fn offsets(&self) -> &[u32] {
        &self.offsets
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    /// Ids stored under `key`, in insertion order.
    pub fn lookup(&self, key: u64) -> Result<&[u32]> {
        if key >> self.key_bits != 0 {
            return Err(Error::ValueOutOfRange { value: key, bits: self.key_bits });
        }
        Ok(self.bucket(key))
    }

    /// Like [`lookup`](Self::lookup) without the range check on `key`.
    #[inline]
    pub fn bucket(&self, key: u64) -> &[u32] {
        let group = self.groups[(key >> self.low_bits) as usize];
        let bit = (key & 31) as u32;
        if group.occupancy >> bit & 1 == 0 {
            return &[];
        }
        self.segment(group, bit)
    }

    #[inline]
    fn segment(&self, group: Group, bit: u32) -> &[u32] {
        let below = group.occupancy & ((1u32 << bit) - 1);
        let rank = (group.first + below.count_ones()) as usize;
        &self.entries[self.offsets[rank] as usize..self.offsets[rank + 1] as usize]
    }

    /// Visits the non-empty buckets whose keys are within `radius` of
    /// `center`. Returns the number of buckets examined, empty or not, which
    /// is the size of the ball clipped to the key width.
    pub fn probe_ball(&self, center: u64, radius: u32, visit: impl FnMut(&[u32])) -> u64 {
        self.probe(center, radius, false, visit)
    }

    /// As [`probe_ball`](Self::probe_ball) but only keys at exactly `radius`.
    pub fn probe_ring(&self, center: u64, radius: u32, visit: impl FnMut(&[u32])) -> u64 {
        self.probe(center, radius, true, visit)
    }

    fn probe(&self, center: u64, radius: u32, exact: bool, mut visit: impl FnMut(&[u32])) -> u64 {
        debug_assert!(center >> self.key_bits == 0);
        let low_bits = self.low_bits;
        let high_bits = self.key_bits - low_bits;
        let rings = low_rings((center & 31) as u32 & ((1 << low_bits) - 1), low_bits);
        let high_center = center >> low_bits;

        let h_min = if exact { radius.saturating_sub(low_bits) } else { 0 };
        let h_max = radius.min(high_bits);
        let mut lookups = 0u64;
        for h in h_min..=h_max {
            let t = radius - h;
            let mask = if exact {
                rings[t as usize]
            } else {
                rings[..=t.min(low_bits) as usize].iter().fold(0, |m, r| m | r)
            };
            let per_group = u64::from(mask.count_ones());
            // Flip sets are generated over bit-reversed group positions so the
            // fastest-changing flip is the lowest group bit, keeping
            // consecutive probes close together in memory.
            for flip in FlipMasks::new(high_bits, h) {
                let rev = if high_bits == 0 { 0 } else { flip.reverse_bits() >> (64 - high_bits) };
                let g = (high_center ^ rev) as usize;
                lookups += per_group;
                if self.used[g / 64] >> (g % 64) & 1 == 0 {
                    continue;
                }
                let group = self.groups[g];
                let mut hits = group.occupancy & mask;
                while hits != 0 {
                    let bit = hits.trailing_zeros();
                    visit(self.segment(group, bit));
                    hits &= hits - 1;
                }
            }
        }
        lookups
    }

    pub fn stats(&self) -> TableStats {
        let non_empty_groups = self.groups.iter().filter(|g| g.occupancy != 0).count() as u64;
        let non_empty_buckets = (self.offsets.len() - 1) as u64;
        let max_bucket_size =
            self.offsets.windows(2).map(|w| u64::from(w[1] - w[0])).max().unwrap_or(0);
        let total_entries = self.entries.len() as u64;
        TableStats {
            key_bits: self.key_bits,
            groups: self.groups.len() as u64,
            non_empty_groups,
            non_empty_buckets,
            max_bucket_size,
            total_entries,
            estimated_bytes: estimated_table_bytes(
                self.key_bits,
                non_empty_groups,
                non_empty_buckets,
                total_entries,
            ),
        }
    }
}

impl core::fmt::Debug for SubstringTable {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SubstringTable")
            .field("key_bits", &self.key_bits)
            .field("entries", &self.entries.len())
            .field("non_empty_buckets", &(self.offsets.len() - 1))
            .finish()
    }
}
