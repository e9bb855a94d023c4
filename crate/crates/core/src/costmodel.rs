//! Analytic search-cost model for uniformly distributed codes.
//!
//! With `b`-bit codes cut into `b / s` substrings of `s` bits, a range search
//! of radius `r` probes each table to radius `floor(s * r / b)`, so the lookup
//! count is `(b / s) * L(s, floor(s * r / b))` where `L(s, t)` is the number of
//! `s`-bit values within distance `t` of a point. Each bucket holds `n / 2^s`
//! codes on average, giving a cost of `(1 + n / 2^s)` per lookup. The
//! binomial-sum bound `L(eta, eps * eta) <= 2^(H(eps) * eta)` turns both into
//! smooth upper bounds, and at `s = log2 n` the cost is at most
//! `2 * (b / log2 n) * n^H(r / b)`.
//!
//! Exact counts use big integers; `L(128, 30)` alone is past `2^64`.

use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::{Error, Result};

/// `C(n, k)` exactly.
pub fn binomial(n: u32, k: u32) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut c = BigUint::one();
    for i in 0..k {
        c *= n - i;
        c /= i + 1;
    }
    c
}

/// `L(s, r)`: how many `s`-bit values lie within Hamming distance `r` of a
/// fixed value.
pub fn ball_size(s: u32, r: u32) -> Result<BigUint> {
    if r > s {
        return Err(Error::RadiusTooLarge { radius: r, bits: s });
    }
    let mut total = BigUint::zero();
    let mut term = BigUint::one();
    for z in 0..=r {
        if z > 0 {
            term *= s - z + 1;
            term /= z;
        }
        total += &term;
    }
    Ok(total)
}

/// Binary entropy in bits. Zero at both ends of `[0, 1]`.
pub fn entropy(eps: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidRatio(eps));
    }
    if eps == 0.0 || eps == 1.0 {
        return Ok(0.0);
    }
    Ok(-eps * libm::log2(eps) - (1.0 - eps) * libm::log2(1.0 - eps))
}

/// `2^(H(eps) * eta)`, an upper bound on `sum_{k <= floor(eps * eta)} C(eta, k)`
/// for `0 < eps <= 1/2`.
pub fn binomial_sum_bound(eta: u32, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::InvalidRatio(eps));
    }
    if eta == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    Ok(libm::exp2(entropy(eps)? * f64::from(eta)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LookupCount {
    pub exact: BigUint,
    pub bound: f64,
}

fn check_model(bits: u32, s: u32, r: u32) -> Result<()> {
    if s == 0 || s > bits {
        return Err(Error::InvalidPartition("substring length must be in 1..=b"));
    }
    if r > bits {
        return Err(Error::RadiusTooLarge { radius: r, bits });
    }
    Ok(())
}

/// Lookups needed to find all `r`-neighbors with `b / s` tables of `s` bits.
/// The bound is meaningful for `r <= b / 2`.
pub fn lookup_count(bits: u32, s: u32, r: u32) -> Result<LookupCount> {
    check_model(bits, s, r)?;
    if bits % s != 0 {
        return Err(Error::NotDivisible { bits, s });
    }
    let tables = bits / s;
    let exact = ball_size(s, s * r / bits)? * tables;
    Ok(LookupCount { exact, bound: lookup_bound(bits, s, r)? })
}

fn lookup_bound(bits: u32, s: u32, r: u32) -> Result<f64> {
    let ratio = f64::from(bits) / f64::from(s);
    Ok(ratio * libm::exp2(entropy(f64::from(r) / f64::from(bits))? * f64::from(s)))
}

/// One point on a cost curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CostPoint {
    pub s: u32,
    /// Buckets probed per table, `L(s, floor(s * r / b))`.
    pub ball: BigUint,
    /// Buckets probed over all `b / s` tables.
    pub lookups: f64,
    pub lookup_bound: f64,
    /// In units of one lookup; candidate checks are assumed to cost the same.
    pub cost: f64,
    pub cost_bound: f64,
}

fn bucket_load(n: f64, s: u32) -> f64 {
    1.0 + n / libm::exp2(f64::from(s))
}

/// Expected cost of one range search over `n` uniform codes, for `s`
/// dividing `b`.
pub fn expected_cost(bits: u32, s: u32, r: u32, n: f64) -> Result<CostPoint> {
    let count = lookup_count(bits, s, r)?;
    let load = bucket_load(n, s);
    let lookups = count.exact.to_f64().unwrap_or(f64::INFINITY);
    Ok(CostPoint {
        s,
        ball: ball_size(s, s * r / bits)?,
        lookups,
        lookup_bound: count.bound,
        cost: load * lookups,
        cost_bound: load * count.bound,
    })
}

/// As [`expected_cost`], for any `s` in `1..=b`, taking the table count
/// `b / s` as a real number.
pub fn relaxed_cost(bits: u32, s: u32, r: u32, n: f64) -> Result<CostPoint> {
    check_model(bits, s, r)?;
    let ball = ball_size(s, s * r / bits)?;
    let tables = f64::from(bits) / f64::from(s);
    let bound = lookup_bound(bits, s, r)?;
    let load = bucket_load(n, s);
    let lookups = tables * ball.to_f64().unwrap_or(f64::INFINITY);
    Ok(CostPoint { s, ball, lookups, lookup_bound: bound, cost: load * lookups, cost_bound: load * bound })
}

/// Which substring lengths a cost curve covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubstringLengths {
    /// Every `s` in `1..=b`, via [`relaxed_cost`].
    All,
    /// Only divisors of `b`, via [`expected_cost`].
    Divisors,
}

pub fn cost_curve(bits: u32, r: u32, n: f64, lengths: SubstringLengths) -> Result<Vec<CostPoint>> {
    (1..=bits)
        .filter(|s| lengths == SubstringLengths::All || bits % s == 0)
        .map(|s| match lengths {
            SubstringLengths::All => relaxed_cost(bits, s, r, n),
            SubstringLengths::Divisors => expected_cost(bits, s, r, n),
        })
        .collect()
}

/// Substring length minimizing `key` over a curve; the shorter wins ties.
pub fn argmin_by(curve: &[CostPoint], key: impl Fn(&CostPoint) -> f64) -> Option<u32> {
    curve
        .iter()
        .fold(None::<(f64, u32)>, |best, p| match best {
            Some((c, _)) if c <= key(p) => best,
            _ => Some((key(p), p.s)),
        })
        .map(|(_, s)| s)
}

/// Upper bound on the cost with `s = log2 n`: `2 (b / log2 n) n^H(r / b)`.
pub fn cost_bound_at_log_n(bits: u32, r: u32, n: f64) -> Result<f64> {
    if n < 2.0 {
        return Err(Error::TooFewSamples { needed: 2, got: n as usize });
    }
    if r > bits {
        return Err(Error::RadiusTooLarge { radius: r, bits });
    }
    let h = entropy(f64::from(r) / f64::from(bits))?;
    Ok(2.0 * f64::from(bits) / libm::log2(n) * libm::pow(n, h))
}

/// `b / log2 n`, the unrounded table-count heuristic.
pub fn tables_ratio(bits: usize, n: f64) -> f64 {
    bits as f64 / libm::log2(n)
}

/// The nearest integer to `b / log2 n`, clamped to `1..=b`. Databases with
/// fewer than two codes get one table.
pub fn choose_num_tables(bits: usize, n: usize) -> usize {
    if n < 2 {
        return 1;
    }
    let m = libm::round(tables_ratio(bits, n as f64));
    (m as usize).clamp(1, bits.max(1))
}

/// Lookups a single full-width table would need for each query's radius.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleTableLookups {
    pub per_query: Vec<BigUint>,
    pub mean: f64,
    pub min: BigUint,
    pub median: BigUint,
    pub max: BigUint,
}

/// `L(b, r_q)` per query radius `r_q`, such as the distance to each query's
/// k-th neighbor.
pub fn single_table_lookups(bits: u32, radii: &[u32]) -> Result<SingleTableLookups> {
    let per_query = radii.iter().map(|&r| ball_size(bits, r)).collect::<Result<Vec<_>>>()?;
    let total: BigUint = per_query.iter().sum();
    let mean = if radii.is_empty() {
        0.0
    } else {
        total.to_f64().unwrap_or(f64::INFINITY) / radii.len() as f64
    };
    let mut sorted = per_query.clone();
    sorted.sort();
    let pick = |i: usize| sorted.get(i).cloned().unwrap_or_default();
    Ok(SingleTableLookups {
        mean,
        min: pick(0),
        median: pick(sorted.len().saturating_sub(1) / 2),
        max: pick(sorted.len().saturating_sub(1)),
        per_query,
    })
}
