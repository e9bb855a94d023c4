//! Multi-index hashing: one substring table per part of a [`Partition`].
//!
//! If two codes are within distance `r = m * r' + a` (`0 <= a < m`), then at
//! least one of the first `a + 1` substrings is within `r'` of the query's,
//! or one of the remaining substrings is within `r' - 1`. Probing the tables
//! with those radii therefore retrieves every `r`-neighbor, and the full-code
//! distance check removes the rest.

use alloc::vec;
use alloc::vec::Vec;

use crate::codes::{word_distance, BinaryCode, CodeDatabase, Partition};
use crate::costmodel::choose_num_tables;
use crate::table::{SubstringTable, MAX_KEY_BITS};
use crate::{Error, Result};

/// Per-table search radii for a full radius `r` over `m` tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RadiusSplit {
    pub radius: u32,
    pub tables: usize,
    /// `floor(r / m)`.
    pub sub_radius: u32,
    /// `r - m * sub_radius`.
    pub remainder: usize,
}

impl RadiusSplit {
    /// Radius to search table `j` with, or `None` if it can be skipped.
    pub fn table_radius(&self, j: usize) -> Option<u32> {
        if j <= self.remainder {
            Some(self.sub_radius)
        } else {
            self.sub_radius.checked_sub(1)
        }
    }
}

/// Panics if `m == 0`.
pub fn split_radius(r: u32, m: usize) -> RadiusSplit {
    assert!(m > 0, "split_radius needs at least one table");
    let sub_radius = r / m as u32;
    RadiusSplit { radius: r, tables: m, sub_radius, remainder: (r - sub_radius * m as u32) as usize }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Neighbor {
    pub distance: u32,
    pub id: u32,
}

/// Search results ordered by `(distance, id)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Neighbors(Vec<Neighbor>);

impl Neighbors {
    /// Sorts `items` into `(distance, id)` order.
    pub fn from_unsorted(mut items: Vec<Neighbor>) -> Self {
        items.sort_unstable();
        Neighbors(items)
    }

    pub fn as_slice(&self) -> &[Neighbor] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Neighbor> {
        self.0.iter()
    }

    pub fn ids(&self) -> impl ExactSizeIterator<Item = u32> + '_ {
        self.0.iter().map(|n| n.id)
    }

    pub fn distances(&self) -> impl ExactSizeIterator<Item = u32> + '_ {
        self.0.iter().map(|n| n.distance)
    }

    pub fn into_vec(self) -> Vec<Neighbor> {
        self.0
    }
}

impl<'a> IntoIterator for &'a Neighbors {
    type Item = &'a Neighbor;
    type IntoIter = core::slice::Iter<'a, Neighbor>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Work done by one query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchTrace {
    /// Buckets examined, empty or not.
    pub lookups: u64,
    /// Ids retrieved from buckets, duplicates included.
    pub candidates: u64,
    pub unique_candidates: u64,
    pub distance_evaluations: u64,
    /// Largest full radius the kNN search had fully covered when it stopped.
    pub final_radius: Option<u32>,
}

#[derive(Clone, PartialEq, Eq)]
pub struct MihIndex {
    db: CodeDatabase,
    partition: Partition,
    tables: Vec<SubstringTable>,
}

/// Default number of tables: `round(b / log2 n)`, raised if needed so that no
/// substring is wider than a table key.
pub fn default_num_tables(bits: usize, n: usize) -> usize {
    choose_num_tables(bits, n).max(bits.div_ceil(MAX_KEY_BITS as usize))
}

impl MihIndex {
    pub fn build(db: CodeDatabase, partition: Partition) -> Result<Self> {
        check_partition(&db, &partition)?;
        let mut keys = Vec::with_capacity(db.len());
        let tables = (0..partition.m())
            .map(|j| {
                keys.clear();
                keys.extend(db.iter().map(|code| partition.extract(code, j)));
                SubstringTable::from_keys(partition.substring_len(j) as u32, &keys)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MihIndex { db, partition, tables })
    }

    /// Index over `m` consecutive substrings.
    pub fn with_tables(db: CodeDatabase, m: usize) -> Result<Self> {
        let partition = Partition::consecutive(db.bits(), m)?;
        Self::build(db, partition)
    }

    /// Index with [`default_num_tables`] consecutive substrings.
    pub fn with_default_tables(db: CodeDatabase) -> Result<Self> {
        let m = default_num_tables(db.bits(), db.len());
        Self::with_tables(db, m)
    }

    /// Reassembles an index from deserialized parts.
    pub fn from_parts(
        db: CodeDatabase,
        partition: Partition,
        tables: Vec<SubstringTable>,
    ) -> Result<Self> {
        check_partition(&db, &partition)?;
        if tables.len() != partition.m() {
            return Err(Error::CorruptTable("table count does not match partition"));
        }
        for (j, t) in tables.iter().enumerate() {
            if t.key_bits() as usize != partition.substring_len(j) {
                return Err(Error::CorruptTable("table width does not match substring"));
            }
            if t.len() != db.len() {
                return Err(Error::CorruptTable("table does not index every code"));
            }
        }
        Ok(MihIndex { db, partition, tables })
    }

    pub fn db(&self) -> &CodeDatabase {
        &self.db
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn tables(&self) -> &[SubstringTable] {
        &self.tables
    }

    pub fn m(&self) -> usize {
        self.tables.len()
    }

    pub fn len(&self) -> usize {
        self.db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.db.is_empty()
    }

    /// Reusable per-thread query state.
    pub fn searcher(&self) -> Searcher<'_> {
        Searcher::new(self)
    }

    pub fn range_search(&self, q: &BinaryCode, r: u32) -> Result<(Neighbors, SearchTrace)> {
        self.searcher().range(q, r)
    }

    pub fn knn_search(&self, q: &BinaryCode, k: usize) -> Result<(Neighbors, SearchTrace)> {
        self.searcher().knn(q, k)
    }
}

impl core::fmt::Debug for MihIndex {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("MihIndex")
            .field("bits", &self.db.bits())
            .field("len", &self.db.len())
            .field("m", &self.tables.len())
            .finish()
    }
}

fn check_partition(db: &CodeDatabase, partition: &Partition) -> Result<()> {
    if partition.bits() != db.bits() {
        return Err(Error::LengthMismatch { expected: db.bits(), actual: partition.bits() });
    }
    match partition.lengths().max() {
        Some(w) if w > MAX_KEY_BITS as usize => {
            Err(Error::SubstringTooWide { bits: w, max: MAX_KEY_BITS as usize })
        }
        _ => Ok(()),
    }
}

/// Query scratch: a mark bit per code for duplicate suppression, the ids
/// marked so far (so clearing costs the candidate count, not `n`), the
/// query's substrings and, for kNN, candidates binned by distance.
pub struct Searcher<'a> {
    index: &'a MihIndex,
    marks: Vec<u64>,
    touched: Vec<u32>,
    keys: Vec<u64>,
    bins: Vec<Vec<u32>>,
}

impl<'a> Searcher<'a> {
    fn new(index: &'a MihIndex) -> Self {
        Searcher {
            index,
            marks: vec![0; index.db.len().div_ceil(64)],
            touched: Vec::new(),
            keys: vec![0; index.m()],
            bins: vec![Vec::new(); index.db.bits() + 1],
        }
    }

    fn prepare(&mut self, q: &BinaryCode) -> Result<()> {
        self.index.db.check_query(q)?;
        for (j, key) in self.keys.iter_mut().enumerate() {
            *key = self.index.partition.extract(q.words(), j);
        }
        Ok(())
    }

    fn clear_marks(&mut self) {
        for &id in &self.touched {
            self.marks[id as usize / 64] = 0;
        }
        self.touched.clear();
    }

    /// Every code within distance `r` of `q`.
    pub fn range(&mut self, q: &BinaryCode, r: u32) -> Result<(Neighbors, SearchTrace)> {
        let bits = self.index.db.bits() as u32;
        if r > bits {
            return Err(Error::RadiusTooLarge { radius: r, bits });
        }
        self.prepare(q)?;
        let Searcher { index, marks, touched, keys, .. } = self;
        let db = &index.db;
        let query = q.words();
        let split = split_radius(r, index.m());
        let mut trace = SearchTrace::default();
        let mut found = Vec::new();
        for (j, table) in index.tables.iter().enumerate() {
            let Some(radius) = split.table_radius(j) else { continue };
            let lookups = table.probe_ball(keys[j], radius, |ids| {
                trace.candidates += ids.len() as u64;
                for &id in ids {
                    let (w, bit) = (id as usize / 64, 1u64 << (id % 64));
                    if marks[w] & bit != 0 {
                        continue;
                    }
                    marks[w] |= bit;
                    touched.push(id);
                    let distance = word_distance(query, db.code_words(id as usize));
                    if distance <= r {
                        found.push(Neighbor { distance, id });
                    }
                }
            });
            trace.lookups += lookups;
        }
        trace.unique_candidates = touched.len() as u64;
        trace.distance_evaluations = trace.unique_candidates;
        self.clear_marks();
        Ok((Neighbors::from_unsorted(found), trace))
    }

    /// The `k` codes closest to `q`, ties at the cut going to smaller ids.
    ///
    /// Tables are probed one ring at a time, cycling through the tables before
    /// growing the substring radius. After probing table `a` at substring
    /// radius `r'`, every code within `m * r' + a` has been seen, so the
    /// search stops once that many guaranteed neighbors reach `k`.
    pub fn knn(&mut self, q: &BinaryCode, k: usize) -> Result<(Neighbors, SearchTrace)> {
        let n = self.index.db.len();
        if k > n {
            return Err(Error::KTooLarge { k, n });
        }
        self.prepare(q)?;
        if k == 0 {
            return Ok((Neighbors::default(), SearchTrace::default()));
        }
        let Searcher { index, marks, touched, keys, bins } = self;
        let db = &index.db;
        let query = q.words();
        let bits = db.bits() as u32;
        let m = index.m();
        let mut trace = SearchTrace::default();

        let mut sub_radius = 0u32;
        let mut table = 0usize;
        let mut radius = 0u32;
        let mut guaranteed = 0usize;
        loop {
            let t = &index.tables[table];
            if sub_radius <= t.key_bits() {
                let lookups = t.probe_ring(keys[table], sub_radius, |ids| {
                    trace.candidates += ids.len() as u64;
                    for &id in ids {
                        let (w, bit) = (id as usize / 64, 1u64 << (id % 64));
                        if marks[w] & bit != 0 {
                            continue;
                        }
                        marks[w] |= bit;
                        touched.push(id);
                        let d = word_distance(query, db.code_words(id as usize));
                        bins[d as usize].push(id);
                    }
                });
                trace.lookups += lookups;
            }
            table += 1;
            if table == m {
                table = 0;
                sub_radius += 1;
            }
            radius += 1;
            guaranteed += bins[radius as usize - 1].len();
            if guaranteed >= k || radius > bits {
                break;
            }
        }
        trace.unique_candidates = touched.len() as u64;
        trace.distance_evaluations = trace.unique_candidates;
        trace.final_radius = Some(radius - 1);

        let mut out = Vec::with_capacity(k);
        for (d, bin) in bins.iter_mut().enumerate().take(radius as usize) {
            if out.len() == k {
                break;
            }
            bin.sort_unstable();
            let take = bin.len().min(k - out.len());
            out.extend(bin[..take].iter().map(|&id| Neighbor { distance: d as u32, id }));
        }
        for bin in bins.iter_mut() {
            bin.clear();
        }
        self.clear_marks();
        Ok((Neighbors(out), trace))
    }
}
