//! Lazy enumeration of Hamming balls and rings around an `s`-bit value.
//!
//! Values come out distance-major; within one distance, flip sets are visited
//! in lexicographic order of their sorted bit positions, so `{0, 1}` precedes
//! `{0, 2}` precedes `{1, 2}`. Each step costs `O(radius)` and nothing is
//! materialized, since a ball can hold far more values than fit in memory.

use crate::{Error, Result};

/// Widest value that can be enumerated.
pub const MAX_WIDTH: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BallSpec {
    width: u32,
    center: u64,
    radius: u32,
}

impl BallSpec {
    pub fn new(width: u32, center: u64, radius: u32) -> Result<Self> {
        if width > MAX_WIDTH {
            return Err(Error::SubstringTooWide { bits: width as usize, max: MAX_WIDTH as usize });
        }
        if width < 64 && center >> width != 0 {
            return Err(Error::ValueOutOfRange { value: center, bits: width });
        }
        if radius > width {
            return Err(Error::RadiusTooLarge { radius, bits: width });
        }
        Ok(BallSpec { width, center, radius })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn center(&self) -> u64 {
        self.center
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }
}

/// All `width`-bit masks with exactly `k` bits set, in combination-lex order.
#[derive(Debug, Clone)]
pub struct FlipMasks {
    width: u32,
    k: u32,
    positions: [u8; MAX_WIDTH as usize],
    mask: u64,
    started: bool,
    done: bool,
}

impl FlipMasks {
    /// Panics if `k > width` or `width > 64`.
    pub fn new(width: u32, k: u32) -> Self {
        assert!(width <= MAX_WIDTH && k <= width, "invalid flip set {k} of {width}");
        let mut positions = [0u8; MAX_WIDTH as usize];
        let mut mask = 0u64;
        for i in 0..k {
            positions[i as usize] = i as u8;
            mask |= 1 << i;
        }
        FlipMasks { width, k, positions, mask, started: false, done: false }
    }

    fn advance(&mut self) -> bool {
        let k = self.k as usize;
        let n = self.width as usize;
        // rightmost position that can still move right
        let Some(i) = (0..k).rev().find(|&i| (self.positions[i] as usize) < n - k + i) else {
            return false;
        };
        for t in i..k {
            self.mask &= !(1u64 << self.positions[t]);
        }
        let base = self.positions[i] + 1;
        for t in i..k {
            self.positions[t] = base + (t - i) as u8;
            self.mask |= 1u64 << self.positions[t];
        }
        true
    }
}

impl Iterator for FlipMasks {
    type Item = u64;

    #[inline]
    fn next(&mut self) -> Option<u64> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
        } else if !self.advance() {
            self.done = true;
            return None;
        }
        Some(self.mask)
    }
}

/// Values at exactly distance `radius` from the center.
#[derive(Debug, Clone)]
pub struct Ring {
    center: u64,
    flips: FlipMasks,
}

impl Iterator for Ring {
    type Item = u64;

    #[inline]
    fn next(&mut self) -> Option<u64> {
        self.flips.next().map(|m| self.center ^ m)
    }
}

/// Values within distance `radius` of the center, closest first.
#[derive(Debug, Clone)]
pub struct Ball {
    spec: BallSpec,
    distance: u32,
    ring: Ring,
}

impl Ball {
    /// Distance of the ring currently being yielded.
    pub fn current_distance(&self) -> u32 {
        self.distance
    }
}

impl Iterator for Ball {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        loop {
            if let Some(v) = self.ring.next() {
                return Some(v);
            }
            if self.distance >= self.spec.radius {
                return None;
            }
            self.distance += 1;
            self.ring = ring_of(self.spec.width, self.spec.center, self.distance);
        }
    }
}

fn ring_of(width: u32, center: u64, radius: u32) -> Ring {
    Ring { center, flips: FlipMasks::new(width, radius) }
}

pub fn enumerate_ring(spec: BallSpec) -> Ring {
    ring_of(spec.width, spec.center, spec.radius)
}

pub fn enumerate_ball(spec: BallSpec) -> Ball {
    Ball { spec, distance: 0, ring: ring_of(spec.width, spec.center, 0) }
}

/// `C(n, k)`; exact for `n <= 64`.
pub fn binomial(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Number of values within distance `radius` of an `n`-bit center.
/// Zero for negative radii.
pub fn ball_len(n: u32, radius: i64) -> u128 {
    if radius < 0 {
        return 0;
    }
    (0..=(radius as u32).min(n)).map(|z| binomial(n, z)).sum()
}
