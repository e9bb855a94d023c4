//! Exhaustive linear scan: the speed baseline and the exactness oracle.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;

use crate::codes::{word_distance, BinaryCode, CodeDatabase};
use crate::mih::{Neighbor, Neighbors};
use crate::{Error, Result};

/// Every code within distance `r` of `q`, ordered by `(distance, id)`.
pub fn scan_range(db: &CodeDatabase, q: &BinaryCode, r: u32) -> Result<Neighbors> {
    db.check_query(q)?;
    let found = db
        .iter()
        .enumerate()
        .filter_map(|(id, code)| {
            let distance = word_distance(q.words(), code);
            (distance <= r).then_some(Neighbor { distance, id: id as u32 })
        })
        .collect();
    Ok(Neighbors::from_unsorted(found))
}

/// The `k` smallest `(distance, id)` pairs.
pub fn scan_knn(db: &CodeDatabase, q: &BinaryCode, k: usize) -> Result<Neighbors> {
    db.check_query(q)?;
    if k > db.len() {
        return Err(Error::KTooLarge { k, n: db.len() });
    }
    if k == 0 {
        return Ok(Neighbors::default());
    }
    // max-heap of the best k so far; its top is the current cut
    let mut heap: BinaryHeap<Neighbor> = BinaryHeap::with_capacity(k + 1);
    let mut cut = u32::MAX;
    for (id, code) in db.iter().enumerate() {
        let distance = word_distance(q.words(), code);
        if distance > cut {
            continue;
        }
        let item = Neighbor { distance, id: id as u32 };
        if heap.len() < k {
            heap.push(item);
            if heap.len() == k {
                cut = heap.peek().map_or(u32::MAX, |n| n.distance);
            }
        } else if item < *heap.peek().unwrap() {
            heap.pop();
            heap.push(item);
            cut = heap.peek().unwrap().distance;
        }
    }
    Ok(Neighbors::from_unsorted(heap.into_vec()))
}

/// Distances from `q` to every code, in id order.
pub fn all_distances(db: &CodeDatabase, q: &BinaryCode) -> Result<Vec<u32>> {
    db.check_query(q)?;
    Ok(db.iter().map(|code| word_distance(q.words(), code)).collect())
}
