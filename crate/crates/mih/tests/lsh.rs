use std::f64::consts::PI;

use mih::gen::gen_correlated_vectors;
use mih::io::VectorSet;
use mih::lsh::{lsh_encode, LshSpec};
use mih_core::hamming_distance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn unit(v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// A pair of unit vectors at angle `theta`.
fn pair_at(theta: f64, dim: usize, rng: &mut ChaCha8Rng) -> (Vec<f32>, Vec<f32>) {
    let mut gauss = || -> Vec<f64> { (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect() };
    let u = unit(gauss());
    let g = gauss();
    let along: f64 = g.iter().zip(&u).map(|(a, b)| a * b).sum();
    let v = unit(g.iter().zip(&u).map(|(a, b)| a - along * b).collect());
    let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| theta.cos() * a + theta.sin() * b).collect();
    (u.iter().map(|&x| x as f32).collect(), w.iter().map(|&x| x as f32).collect())
}

/// The fraction of differing bits estimates `theta / pi` with standard
/// deviation at most `0.5 / sqrt(b)`, which is 0.0078 at 4096 bits. The
/// mean absolute error over 200 pairs must be within 0.02 and no single
/// pair may be off by more than five standard deviations.
#[test]
fn differing_bits_track_angle() {
    let (dim, bits) = (32, 4096);
    let spec = LshSpec::new(dim, bits, 17, vec![0.0; dim]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut total_error = 0.0;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let theta = rng.random_range(0.0..PI);
        let (u, w) = pair_at(theta, dim, &mut rng);
        let d = hamming_distance(&spec.encode_one(&u).unwrap(), &spec.encode_one(&w).unwrap()).unwrap();
        let err = (f64::from(d) / bits as f64 - theta / PI).abs();
        total_error += err;
        worst = worst.max(err);
    }
    let mean_error = total_error / 200.0;
    assert!(mean_error <= 0.02, "mean error {mean_error}");
    assert!(worst <= 5.0 * 0.5 / (bits as f64).sqrt(), "worst error {worst}");
}

#[test]
fn encode_matches_encode_one() {
    let vectors = gen_correlated_vectors(50, 24, 4, 3).unwrap();
    let (db, spec) = lsh_encode(&vectors, 100, 8).unwrap();
    assert_eq!(db.len(), 50);
    for (i, row) in vectors.rows().enumerate() {
        assert_eq!(db.get(i).unwrap(), spec.encode_one(row).unwrap());
    }
}

#[test]
fn fitted_mean_is_column_mean() {
    let v = VectorSet::new(2, vec![1.0, 10.0, 3.0, 20.0]).unwrap();
    let spec = LshSpec::fit(&v, 8, 0).unwrap();
    assert_eq!(spec.mean(), &[2.0, 15.0]);
    // the mean itself projects to zero on every row
    assert_eq!(spec.encode_one(&[2.0, 15.0]).unwrap().count_ones(), 8);
}

#[test]
fn bit_is_sign_of_projection() {
    let spec = LshSpec::new(3, 40, 4, vec![0.1, 0.2, 0.3]).unwrap();
    let v = [0.7f32, -0.4, 1.9];
    let code = spec.encode_one(&v).unwrap();
    for j in 0..40 {
        let dot: f64 = spec.row(j).iter().zip(v.iter().zip(spec.mean())).map(|(a, (&x, m))| a * (f64::from(x) - m)).sum();
        assert_eq!(code.bit(j), dot >= 0.0);
    }
}
