//! Correlation-driven assignment of bits to substrings.
//!
//! Codes from random projections often have strongly correlated bits. When
//! correlated bits share a substring, that substring takes fewer distinct
//! values and its buckets grow. [`greedy_assign`] spreads correlated bits
//! across substrings instead: it seeds each substring with a bit strongly
//! correlated to the previous seed, then repeatedly gives each substring the
//! unused bit whose strongest correlation with the substring's current
//! members is weakest.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codes::{balanced_lengths, CodeDatabase, Partition};
use crate::{Error, Result};

/// Absolute Pearson correlations between bit positions.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    bits: usize,
    values: Vec<f64>,
    constant: Vec<bool>,
}

impl CorrelationMatrix {
    /// Builds a matrix from `f(i, j)` for `i < j`, mirrored; the diagonal is 1.
    /// Values are clamped to `[0, 1]` after taking the absolute value.
    pub fn from_fn(bits: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = vec![0.0; bits * bits];
        for i in 0..bits {
            values[i * bits + i] = 1.0;
            for j in i + 1..bits {
                let v = f(i, j).abs().min(1.0);
                values[i * bits + j] = v;
                values[j * bits + i] = v;
            }
        }
        CorrelationMatrix { bits, values, constant: vec![false; bits] }
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.bits + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.bits..(i + 1) * self.bits]
    }

    /// Whether bit `i` never varied in the sample.
    pub fn is_constant(&self, i: usize) -> bool {
        self.constant[i]
    }
}

/// Estimates `|corr|` for every pair of bit positions over `sample`.
/// Constant bits get correlation 0 with every other bit.
pub fn estimate_correlations(sample: &CodeDatabase) -> Result<CorrelationMatrix> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let bits = sample.bits();
    // bit-major transpose: column i holds bit i of every code
    let words = n.div_ceil(64);
    let mut columns = vec![0u64; bits * words];
    for (id, code) in sample.iter().enumerate() {
        for (w, &word) in code.iter().enumerate() {
            let mut rest = word;
            while rest != 0 {
                let i = w * 64 + rest.trailing_zeros() as usize;
                columns[i * words + id / 64] |= 1 << (id % 64);
                rest &= rest - 1;
            }
        }
    }
    let column = |i: usize| &columns[i * words..(i + 1) * words];
    let nf = n as f64;
    let p: Vec<f64> =
        (0..bits).map(|i| column(i).iter().map(|w| w.count_ones()).sum::<u32>() as f64 / nf).collect();
    let var: Vec<f64> = p.iter().map(|p| p * (1.0 - p)).collect();

    let mut m = CorrelationMatrix::from_fn(bits, |i, j| {
        if var[i] == 0.0 || var[j] == 0.0 {
            return 0.0;
        }
        let both: u32 = column(i).iter().zip(column(j)).map(|(a, b)| (a & b).count_ones()).sum();
        (f64::from(both) / nf - p[i] * p[j]) / libm::sqrt(var[i] * var[j])
    });
    m.constant = var.iter().map(|&v| v == 0.0).collect();
    Ok(m)
}

/// Greedy low-correlation partition of the bits into `m` balanced substrings.
///
/// Substring capacities are the balanced lengths, longer ones first. Ties go
/// to the lowest bit index. Constant bits are placed last, round-robin over
/// substrings with room. Each substring's positions are returned in
/// ascending order.
pub fn greedy_assign(corr: &CorrelationMatrix, m: usize, seed: u64) -> Result<Partition> {
    let bits = corr.bits;
    if m == 0 || m > bits {
        return Err(Error::InvalidPartition("need 1 <= m <= b"));
    }
    let quota: Vec<usize> = balanced_lengths(bits, m).collect();
    let mut state = Assignment {
        corr,
        subs: vec![Vec::new(); m],
        used: vec![false; bits],
        worst: vec![0.0; m * bits],
    };

    let varying: Vec<usize> = (0..bits).filter(|&i| !corr.constant[i]).collect();
    let mut left = varying.len();
    if left > 0 {
        let first = varying[ChaCha8Rng::seed_from_u64(seed).random_range(0..varying.len())];
        state.assign(0, first);
        left -= 1;
        let mut prev = first;
        for j in 1..m {
            if left == 0 {
                break;
            }
            let next = pick(&varying, &state.used, |i| -corr.get(prev, i));
            state.assign(j, next);
            left -= 1;
            prev = next;
        }
        while left > 0 {
            for j in 0..m {
                if left == 0 {
                    break;
                }
                if state.subs[j].len() >= quota[j] {
                    continue;
                }
                let row = &state.worst[j * bits..(j + 1) * bits];
                let next = pick(&varying, &state.used, |i| row[i]);
                state.assign(j, next);
                left -= 1;
            }
        }
    }

    let mut subs = state.subs;
    let mut j = 0;
    for bit in (0..bits).filter(|&i| corr.constant[i]) {
        while subs[j].len() >= quota[j] {
            j = (j + 1) % m;
        }
        subs[j].push(bit as u32);
        j = (j + 1) % m;
    }

    for s in &mut subs {
        s.sort_unstable();
    }
    Partition::from_substrings(bits, subs)
}

struct Assignment<'a> {
    corr: &'a CorrelationMatrix,
    subs: Vec<Vec<u32>>,
    used: Vec<bool>,
    /// `worst[j * bits + i]`: strongest correlation of bit `i` with substring `j`.
    worst: Vec<f64>,
}

impl Assignment<'_> {
    fn assign(&mut self, j: usize, bit: usize) {
        let bits = self.corr.bits;
        self.subs[j].push(bit as u32);
        self.used[bit] = true;
        for (w, &c) in self.worst[j * bits..(j + 1) * bits].iter_mut().zip(self.corr.row(bit)) {
            *w = w.max(c);
        }
    }
}

/// Unused bit from `pool` minimizing `score`; the lowest index wins ties.
fn pick(pool: &[usize], used: &[bool], score: impl Fn(usize) -> f64) -> usize {
    let mut best: Option<(f64, usize)> = None;
    for &i in pool {
        if used[i] {
            continue;
        }
        let s = score(i);
        if best.is_none_or(|(b, _)| s < b) {
            best = Some((s, i));
        }
    }
    best.expect("pool exhausted").1
}

/// Mean over bits of the strongest correlation with another bit of the same
/// substring. Lower means the substrings mix less-related bits.
pub fn mean_within_max_correlation(corr: &CorrelationMatrix, partition: &Partition) -> f64 {
    let mut total = 0.0;
    for sub in partition.substrings() {
        for &i in sub {
            let worst = sub
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| corr.get(i as usize, j as usize))
                .fold(0.0, f64::max);
            total += worst;
        }
    }
    total / partition.bits() as f64
}
