//! Angular locality-sensitive hashing: signs of Gaussian random projections
//! of mean-centered vectors.

use mih_core::{BinaryCode, CodeDatabase};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::io::VectorSet;
use crate::{Error, Result};

/// A `bits x dim` projection with standard normal coefficients, drawn
/// deterministically from `seed`, plus the mean subtracted before projecting.
#[derive(Debug, Clone, PartialEq)]
pub struct LshSpec {
    dim: usize,
    bits: usize,
    seed: u64,
    mean: Vec<f64>,
    projection: Vec<f64>,
}

impl LshSpec {
    pub fn new(dim: usize, bits: usize, seed: u64, mean: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("vector dimension 0".into()));
        }
        if mean.len() != dim {
            return Err(Error::Dimension { expected: dim, actual: mean.len() });
        }
        BinaryCode::zeros(bits)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let projection = (0..bits * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        Ok(LshSpec { dim, bits, seed, mean, projection })
    }

    /// Spec whose mean is the column mean of `vectors`.
    pub fn fit(vectors: &VectorSet, bits: usize, seed: u64) -> Result<Self> {
        let mut mean = vec![0.0f64; vectors.dim()];
        for row in vectors.rows() {
            for (m, &x) in mean.iter_mut().zip(row) {
                *m += f64::from(x);
            }
        }
        if !vectors.is_empty() {
            let n = vectors.len() as f64;
            mean.iter_mut().for_each(|m| *m /= n);
        }
        Self::new(vectors.dim(), bits, seed, mean)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Coefficients of output bit `j`.
    pub fn row(&self, j: usize) -> &[f64] {
        &self.projection[j * self.dim..(j + 1) * self.dim]
    }

    /// Bit `j` is set when the projection onto row `j` is `>= 0`, so a vector
    /// equal to the mean encodes to all ones.
    pub fn encode_one(&self, v: &[f32]) -> Result<BinaryCode> {
        let mut words = vec![0u64; self.bits.div_ceil(64)];
        self.encode_into(v, &mut words)?;
        Ok(BinaryCode::from_words(self.bits, words)?)
    }

    fn encode_into(&self, v: &[f32], words: &mut [u64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, actual: v.len() });
        }
        let centered: Vec<f64> = v.iter().zip(&self.mean).map(|(&x, m)| f64::from(x) - m).collect();
        for (j, row) in self.projection.chunks_exact(self.dim).enumerate() {
            let dot: f64 = row.iter().zip(&centered).map(|(a, x)| a * x).sum();
            if dot >= 0.0 {
                words[j / 64] |= 1 << (j % 64);
            }
        }
        Ok(())
    }

    pub fn encode(&self, vectors: &VectorSet) -> Result<CodeDatabase> {
        if vectors.dim() != self.dim {
            return Err(Error::Dimension { expected: self.dim, actual: vectors.dim() });
        }
        let stride = self.bits.div_ceil(64);
        let mut words = vec![0u64; vectors.len() * stride];
        for (row, out) in vectors.rows().zip(words.chunks_exact_mut(stride)) {
            self.encode_into(row, out)?;
        }
        Ok(CodeDatabase::from_words(self.bits, words)?)
    }
}

/// Encodes `vectors` with a spec fitted to them.
pub fn lsh_encode(vectors: &VectorSet, bits: usize, seed: u64) -> Result<(CodeDatabase, LshSpec)> {
    let spec = LshSpec::fit(vectors, bits, seed)?;
    Ok((spec.encode(vectors)?, spec))
}
