#![allow(dead_code)]

use freehull::matops::symmetrize;
use freehull::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn sym(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    symmetrize(&mat(rng, n, n))
}

/// Largest absolute eigenvalue via nalgebra.
pub fn oracle_norm(m: &Mat) -> f64 {
    nalgebra::SymmetricEigen::new(symmetrize(m)).eigenvalues.amax()
}

pub fn oracle_min_eig(m: &Mat) -> f64 {
    nalgebra::SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}
