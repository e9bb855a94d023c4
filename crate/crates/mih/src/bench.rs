//! Timing harness comparing a search method against a baseline.
//!
//! Every query is first answered by both methods and the answers compared;
//! a single mismatch aborts the run before anything is timed. Queries are
//! then timed one at a time on the current thread after an untimed warm-up.

use std::io::Write;
use std::time::Instant;

use mih_core::mih::default_num_tables;
use mih_core::table::MAX_KEY_BITS;
use mih_core::{scan_knn, scan_range, BinaryCode, CodeDatabase, MihIndex, Neighbors, SearchTrace, Searcher};
use serde::Serialize;

use crate::{Error, Result};

/// Something that answers kNN and range queries. Methods that keep search
/// statistics return them alongside the answer.
pub trait SearchMethod {
    fn name(&self) -> &str;
    fn knn(&mut self, q: &BinaryCode, k: usize) -> Result<(Neighbors, Option<SearchTrace>)>;
    fn range(&mut self, q: &BinaryCode, r: u32) -> Result<(Neighbors, Option<SearchTrace>)>;

    fn run(&mut self, q: &BinaryCode, query: Query) -> Result<(Neighbors, Option<SearchTrace>)> {
        match query {
            Query::Knn(k) => self.knn(q, k),
            Query::Range(r) => self.range(q, r),
        }
    }
}

pub struct MihMethod<'a>(Searcher<'a>);

impl<'a> MihMethod<'a> {
    pub fn new(index: &'a MihIndex) -> Self {
        MihMethod(index.searcher())
    }
}

impl SearchMethod for MihMethod<'_> {
    fn name(&self) -> &str {
        "mih"
    }

    fn knn(&mut self, q: &BinaryCode, k: usize) -> Result<(Neighbors, Option<SearchTrace>)> {
        let (found, trace) = self.0.knn(q, k)?;
        Ok((found, Some(trace)))
    }

    fn range(&mut self, q: &BinaryCode, r: u32) -> Result<(Neighbors, Option<SearchTrace>)> {
        let (found, trace) = self.0.range(q, r)?;
        Ok((found, Some(trace)))
    }
}

pub struct ScanMethod<'a>(pub &'a CodeDatabase);

impl SearchMethod for ScanMethod<'_> {
    fn name(&self) -> &str {
        "scan"
    }

    fn knn(&mut self, q: &BinaryCode, k: usize) -> Result<(Neighbors, Option<SearchTrace>)> {
        Ok((scan_knn(self.0, q, k)?, None))
    }

    fn range(&mut self, q: &BinaryCode, r: u32) -> Result<(Neighbors, Option<SearchTrace>)> {
        Ok((scan_range(self.0, q, r)?, None))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Query {
    Knn(usize),
    Range(u32),
}

impl Query {
    pub fn kind(&self) -> &'static str {
        match self {
            Query::Knn(_) => "knn",
            Query::Range(_) => "range",
        }
    }

    pub fn param(&self) -> u64 {
        match *self {
            Query::Knn(k) => k as u64,
            Query::Range(r) => u64::from(r),
        }
    }
}

impl std::fmt::Display for Query {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Query::Knn(k) => write!(f, "knn k={k}"),
            Query::Range(r) => write!(f, "range r={r}"),
        }
    }
}

/// kNN answers agree when their distance lists match, since ties at the
/// k-th distance may legitimately select different ids. Range answers must
/// match exactly.
pub fn answers_match(query: Query, a: &Neighbors, b: &Neighbors) -> bool {
    match query {
        Query::Knn(_) => a.distances().eq(b.distances()),
        Query::Range(_) => a == b,
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub queries: Vec<Query>,
    /// Untimed queries run by each method before timing each query type.
    pub warmup: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodRow {
    pub query: &'static str,
    pub param: u64,
    pub method: String,
    pub queries: usize,
    pub mean_us: f64,
    pub median_us: f64,
    pub p95_us: f64,
    pub mean_lookups: Option<f64>,
    pub mean_unique_candidates: Option<f64>,
    /// Baseline mean time over this method's mean time.
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub method: String,
    pub baseline: String,
    pub queries: usize,
    pub warmup_queries: usize,
    pub parallel: bool,
    pub rows: Vec<MethodRow>,
}

impl BenchReport {
    pub fn row(&self, method: &str, query: Query) -> Option<&MethodRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.query == query.kind() && r.param == query.param())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingSummary {
    pub mean_us: f64,
    pub median_us: f64,
    pub p95_us: f64,
}

/// Mean, median and 95th percentile (nearest rank) of per-query times.
pub fn summarize(times_us: &[f64]) -> TimingSummary {
    if times_us.is_empty() {
        return TimingSummary { mean_us: 0.0, median_us: 0.0, p95_us: 0.0 };
    }
    let mut sorted = times_us.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = |p: f64| sorted[((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1];
    TimingSummary {
        mean_us: sorted.iter().sum::<f64>() / sorted.len() as f64,
        median_us: rank(0.5),
        p95_us: rank(0.95),
    }
}

/// Wall-clock time of each query in microseconds.
pub fn time_queries(
    method: &mut dyn SearchMethod,
    queries: &[BinaryCode],
    query: Query,
) -> Result<Vec<f64>> {
    let mut times = Vec::with_capacity(queries.len());
    for q in queries {
        let start = Instant::now();
        let out = method.run(q, query)?;
        times.push(start.elapsed().as_secs_f64() * 1e6);
        std::hint::black_box(out);
    }
    Ok(times)
}

/// Verifies that `method` and `baseline` agree on every query, then times
/// both. Returns [`Error::Mismatch`] on the first disagreement.
pub fn run_benchmark(
    method: &mut dyn SearchMethod,
    baseline: &mut dyn SearchMethod,
    queries: &CodeDatabase,
    config: &BenchConfig,
) -> Result<BenchReport> {
    let codes: Vec<BinaryCode> = (0..queries.len()).map(|i| queries.get(i).unwrap()).collect();
    let mut rows = Vec::new();
    for &query in &config.queries {
        let mut lookups = 0u64;
        let mut unique = 0u64;
        let mut traced = false;
        for (i, q) in codes.iter().enumerate() {
            let (found, trace) = method.run(q, query)?;
            let (expected, _) = baseline.run(q, query)?;
            if !answers_match(query, &found, &expected) {
                return Err(Error::Mismatch(format!(
                    "{query}, query {i}: {} returned {:?}, {} returned {:?}",
                    method.name(),
                    found.as_slice(),
                    baseline.name(),
                    expected.as_slice()
                )));
            }
            if let Some(t) = trace {
                traced = true;
                lookups += t.lookups;
                unique += t.unique_candidates;
            }
        }
        let per_query = |total: u64| traced.then(|| total as f64 / codes.len().max(1) as f64);

        let warm = &codes[..config.warmup.min(codes.len())];
        time_queries(method, warm, query)?;
        let method_times = summarize(&time_queries(method, &codes, query)?);
        time_queries(baseline, warm, query)?;
        let baseline_times = summarize(&time_queries(baseline, &codes, query)?);

        let speedup = |t: &TimingSummary| {
            if t.mean_us > 0.0 {
                baseline_times.mean_us / t.mean_us
            } else {
                f64::NAN
            }
        };
        let row = |name: &str, t: &TimingSummary, lookups, unique| MethodRow {
            query: query.kind(),
            param: query.param(),
            method: name.to_string(),
            queries: codes.len(),
            mean_us: t.mean_us,
            median_us: t.median_us,
            p95_us: t.p95_us,
            mean_lookups: lookups,
            mean_unique_candidates: unique,
            speedup: speedup(t),
        };
        rows.push(row(method.name(), &method_times, per_query(lookups), per_query(unique)));
        rows.push(row(baseline.name(), &baseline_times, None, None));
    }
    Ok(BenchReport {
        method: method.name().to_string(),
        baseline: baseline.name().to_string(),
        queries: codes.len(),
        warmup_queries: config.warmup.min(codes.len()),
        parallel: false,
        rows,
    })
}

pub fn write_report_csv(report: &BenchReport, w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in &report.rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_report_json(report: &BenchReport, mut w: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w)?;
    Ok(())
}

/// Outcome of timing several table counts on a sample of queries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableChoice {
    pub heuristic: usize,
    pub selected: usize,
    /// `(m, mean kNN query time in microseconds)` for each candidate.
    pub timings: Vec<(usize, f64)>,
}

/// Times kNN queries on consecutive-partition indexes with `m` one below,
/// at and one above the `round(b / log2 n)` heuristic, skipping counts that
/// would need substrings wider than a table key, and picks the fastest.
pub fn select_num_tables(db: &CodeDatabase, sample: &CodeDatabase, k: usize) -> Result<TableChoice> {
    let heuristic = default_num_tables(db.bits(), db.len());
    let min_m = db.bits().div_ceil(MAX_KEY_BITS as usize);
    let candidates = (heuristic.saturating_sub(1)..=heuristic + 1).filter(|&m| m >= min_m && m <= db.bits());
    let codes: Vec<BinaryCode> = (0..sample.len()).map(|i| sample.get(i).unwrap()).collect();
    let mut timings = Vec::new();
    for m in candidates {
        let index = MihIndex::with_tables(db.clone(), m)?;
        let mut method = MihMethod::new(&index);
        time_queries(&mut method, &codes[..codes.len().min(10)], Query::Knn(k))?;
        let t = summarize(&time_queries(&mut method, &codes, Query::Knn(k))?);
        timings.push((m, t.mean_us));
    }
    let selected = timings
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|&(m, _)| m)
        .unwrap_or(heuristic);
    Ok(TableChoice { heuristic, selected, timings })
}
