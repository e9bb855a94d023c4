//! Exact nearest neighbor search over binary codes in Hamming space.
//!
//! Codes are split into `m` disjoint substrings and each substring is indexed
//! in its own direct-address table. A query probes every table for substrings
//! near its own and validates the retrieved candidates against the full code.
//! Because the substrings are disjoint, two codes within distance `r` must
//! agree to within `r / m` bits on at least one substring, so the candidate
//! set always contains every true neighbor: search is exact, not approximate.
//!
//! Two searches are provided on a [`MihIndex`]:
//!
//! - *range search* returns every code within a fixed radius of the query,
//! - *k-nearest neighbor search* grows the radius one bit at a time until the
//!   `k` closest codes are certain to have been seen.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, data generation,
//! benchmarking and the command line live in the companion `mih` crate.
//!
//! ```
//! use mih_core::{BinaryCode, CodeDatabase, MihIndex, Partition};
//!
//! let mut db = CodeDatabase::new(8).unwrap();
//! for s in ["00000000", "00000001", "11111111", "00001111"] {
//!     db.push(&BinaryCode::from_bit_str(s).unwrap()).unwrap();
//! }
//! let index = MihIndex::build(db, Partition::consecutive(8, 2).unwrap()).unwrap();
//!
//! let q = BinaryCode::from_bit_str("00000011").unwrap();
//! let (found, _trace) = index.knn_search(&q, 2).unwrap();
//! assert_eq!(found.ids().collect::<Vec<_>>(), vec![1, 0]);
//! ```

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod codes;
pub mod costmodel;
pub mod enumerate;
mod error;
pub mod mih;
pub mod optimize;
pub mod scan;
pub mod table;

pub use codes::{hamming_distance, BinaryCode, CodeDatabase, Partition};
pub use enumerate::{enumerate_ball, enumerate_ring, BallSpec};
pub use error::{Error, Result};
pub use mih::{split_radius, MihIndex, Neighbor, Neighbors, RadiusSplit, SearchTrace, Searcher};
pub use optimize::{estimate_correlations, greedy_assign, CorrelationMatrix};
pub use scan::{scan_knn, scan_range};
pub use table::{SubstringTable, TableStats};
