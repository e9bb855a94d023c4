//! Seeded synthetic datasets.

use mih_core::codes::words_for;
use mih_core::CodeDatabase;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::io::VectorSet;
use crate::{Error, Result};

/// `n` independent uniform `bits`-bit codes.
pub fn gen_uniform(n: usize, bits: usize, seed: u64) -> Result<CodeDatabase> {
    CodeDatabase::new(bits)?;
    let stride = words_for(bits);
    let pad = if bits % 64 == 0 { !0u64 } else { (1u64 << (bits % 64)) - 1 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words: Vec<u64> = (0..n * stride).map(|_| rng.random()).collect();
    for code in words.chunks_exact_mut(stride) {
        code[stride - 1] &= pad;
    }
    Ok(CodeDatabase::from_words(bits, words)?)
}

/// Codes whose bits come in consecutive runs of `block` identical copies of
/// one uniform bit; the last run is shorter when `block` does not divide
/// `bits`.
pub fn gen_block_codes(n: usize, bits: usize, block: usize, seed: u64) -> Result<CodeDatabase> {
    if block == 0 {
        return Err(Error::InvalidArgument("block size 0".into()));
    }
    let latent = gen_uniform(n, bits.div_ceil(block), seed)?;
    let stride = words_for(bits);
    let mut words = vec![0u64; n * stride];
    for (src, dst) in latent.iter().zip(words.chunks_exact_mut(stride)) {
        for i in 0..bits {
            let l = i / block;
            if src[l / 64] >> (l % 64) & 1 == 1 {
                dst[i / 64] |= 1 << (i % 64);
            }
        }
    }
    Ok(CodeDatabase::from_words(bits, words)?)
}

/// Vectors with strongly correlated dimensions: a Gaussian latent vector with
/// decaying per-coordinate scale, each coordinate copied into `block`
/// consecutive dimensions with a little independent noise, plus a fixed
/// offset so the data is not centered.
pub fn gen_correlated_vectors(n: usize, dim: usize, block: usize, seed: u64) -> Result<VectorSet> {
    if block == 0 || dim == 0 {
        return Err(Error::InvalidArgument(format!("dimension {dim}, block {block}")));
    }
    let latent_dim = dim.div_ceil(block);
    let scale: Vec<f64> = (0..latent_dim).map(|k| 1.0 / (1.0 + k as f64).sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut data = Vec::with_capacity(n * dim);
    let mut z = vec![0.0f64; latent_dim];
    for _ in 0..n {
        for (zk, s) in z.iter_mut().zip(&scale) {
            let g: f64 = StandardNormal.sample(&mut rng);
            *zk = s * g;
        }
        for (i, o) in offset.iter().enumerate() {
            let noise: f64 = StandardNormal.sample(&mut rng);
            data.push((o + z[i / block] + 0.1 * noise) as f32);
        }
    }
    VectorSet::new(dim, data)
}
