//! Deterministic inputs shared by the benchmarks.

use freehull::moments::{moments_from_representation, Isometry, MomentSequence};
use freehull::scenarios::{malicious_point, TvScreenConfig};
use freehull::{Mat, MatrixTuple};

/// Symmetric `n×n` matrix with entries `sin(i + 2j) + sin(j + 2i)`, scaled to
/// spectral radius at most `scale`.
pub fn wavy_sym(n: usize, scale: f64) -> Mat {
    let m = Mat::from_fn(n, n, |i, j| ((i + 2 * j) as f64).sin() + ((j + 2 * i) as f64).sin());
    let bound = m.abs().row_sum().max().max(1e-12);
    m * (scale / bound)
}

/// The malicious TV-screen point, shrunk by `factor`.
pub fn malicious(factor: f64) -> MatrixTuple {
    let mp = malicious_point(&TvScreenConfig::default()).expect("default configuration is valid");
    MatrixTuple::new(mp.tuple().mats().iter().map(|m| m * factor).collect()).expect("2×2 pair")
}

pub fn scalar_point(x: f64, y: f64) -> MatrixTuple {
    MatrixTuple::new(vec![Mat::from_element(1, 1, x), Mat::from_element(1, 1, y)]).expect("1×1 pair")
}

/// Moments of degree `<= deg` of a pair of `m×m` matrices compressed to `n`.
pub fn representation_moments(m: usize, n: usize, deg: usize) -> MomentSequence {
    let z = MatrixTuple::new(vec![wavy_sym(m, 0.9), wavy_sym(m, 0.7).map(|v| -v) + Mat::identity(m, m) * 0.1])
        .expect("symmetric pair");
    let v = Isometry::new(Mat::identity(m, n)).expect("leading columns of the identity");
    moments_from_representation(&z, &v, deg).expect("representation moments")
}
