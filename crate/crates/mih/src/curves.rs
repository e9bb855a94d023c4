//! Tabular cost-model output: cost curves over substring length and the
//! single-table lookup comparison.

use mih_core::costmodel::{cost_curve, single_table_lookups, SubstringLengths};
use mih_core::{CodeDatabase, MihIndex};
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::Result;

/// One point of a cost curve. `ball` is the exact per-table bucket count,
/// which may exceed any fixed-width integer, so it is kept as a decimal
/// string; `lookups` is the total over all `b / s` tables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub bits: u32,
    pub n: f64,
    pub r: u32,
    pub s: u32,
    pub ball: String,
    pub lookups: f64,
    pub lookup_bound: f64,
    pub cost: f64,
    pub cost_bound: f64,
}

/// Cost curves for every combination of database size and radius.
pub fn cost_curves(bits: u32, radii: &[u32], sizes: &[f64], lengths: SubstringLengths) -> Result<Vec<CurveRow>> {
    let mut rows = Vec::new();
    for &n in sizes {
        for &r in radii {
            for p in cost_curve(bits, r, n, lengths)? {
                rows.push(CurveRow {
                    bits,
                    n,
                    r,
                    s: p.s,
                    ball: p.ball.to_string(),
                    lookups: p.lookups,
                    lookup_bound: p.lookup_bound,
                    cost: p.cost,
                    cost_bound: p.cost_bound,
                });
            }
        }
    }
    Ok(rows)
}

/// Lookups a single full-width table would need to answer each kNN query,
/// set against the lookups multi-index hashing actually made.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleTableComparison {
    pub bits: u32,
    pub n: usize,
    pub k: usize,
    pub queries: usize,
    pub mean_knn_radius: f64,
    pub mean_single_table_lookups: f64,
    pub median_single_table_lookups: f64,
    pub mean_mih_lookups: f64,
}

impl SingleTableComparison {
    pub fn over_n(&self) -> f64 {
        self.mean_single_table_lookups / self.n as f64
    }

    pub fn over_mih(&self) -> f64 {
        self.mean_single_table_lookups / self.mean_mih_lookups
    }
}

/// Runs kNN for every query, takes the distance of each query's k-th
/// neighbor as the radius a single table would have to search, and counts
/// that table's lookups.
pub fn single_table_comparison(index: &MihIndex, queries: &CodeDatabase, k: usize) -> Result<SingleTableComparison> {
    let mut searcher = index.searcher();
    let mut radii = Vec::with_capacity(queries.len());
    let mut mih_lookups = 0u64;
    for i in 0..queries.len() {
        let (found, trace) = searcher.knn(&queries.get(i).unwrap(), k)?;
        radii.push(found.distances().last().unwrap_or(0));
        mih_lookups += trace.lookups;
    }
    let bits = index.db().bits() as u32;
    let single = single_table_lookups(bits, &radii)?;
    let count = queries.len().max(1) as f64;
    Ok(SingleTableComparison {
        bits,
        n: index.len(),
        k,
        queries: queries.len(),
        mean_knn_radius: radii.iter().map(|&r| f64::from(r)).sum::<f64>() / count,
        mean_single_table_lookups: single.mean,
        median_single_table_lookups: single.median.to_f64().unwrap_or(f64::INFINITY),
        mean_mih_lookups: mih_lookups as f64 / count,
    })
}
