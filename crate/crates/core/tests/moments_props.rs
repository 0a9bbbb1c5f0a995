mod common;

use common::{mat, oracle_min_eig, rng, sym};
use freehull::matops::spectral_norm;
use freehull::moments::{
    build_hankel, build_localizing, growth_bound_check, moments_from_representation, riesz_apply, Isometry,
    MomentSequence,
};
use freehull::{enumerate_words, parse_poly, Mat, MatrixPoly, MatrixTuple};
use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;

fn representation(r: &mut ChaCha8Rng, g: usize, m: usize, n: usize, deg: usize) -> (MatrixTuple, MomentSequence) {
    let z = MatrixTuple::new((0..g).map(|_| sym(r, m)).collect()).unwrap();
    let v = Isometry::orthonormalize(&mat(r, m, n)).unwrap();
    let y = moments_from_representation(&z, &v, deg).unwrap();
    (z, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn representations_are_symmetric_and_psd(seed in any::<u64>(), g in 1usize..3, m in 1usize..5, deg in 0usize..7) {
        let mut r = rng(seed);
        let n = 1 + (seed as usize) % m;
        let (_, y) = representation(&mut r, g, m, n, deg);
        for w in enumerate_words(g, deg) {
            prop_assert!((y.get(&w.star()) - y.get(&w).transpose()).amax() <= 1e-14);
        }
        for d in 0..=deg / 2 {
            let h = build_hankel(&y, d).unwrap().flatten();
            prop_assert!(oracle_min_eig(&h) >= -1e-10 * (1.0 + h.amax()));
        }
    }

    #[test]
    fn moments_grow_at_most_geometrically(seed in any::<u64>(), g in 1usize..3, m in 1usize..5, deg in 1usize..7) {
        let mut r = rng(seed);
        let (z, y) = representation(&mut r, g, m, 1, deg);
        let k = z.mats().iter().map(spectral_norm).fold(0.0, f64::max);
        prop_assert!(growth_bound_check(&y, k, deg).is_empty());
    }

    #[test]
    fn hankel_is_exactly_symmetric(seed in any::<u64>(), g in 1usize..3, m in 1usize..4, d in 0usize..4) {
        let mut r = rng(seed);
        let (_, y) = representation(&mut r, g, m, 1 + m / 2, 2 * d);
        let h = build_hankel(&y, d).unwrap().flatten();
        prop_assert_eq!(h.transpose(), h);
    }

    #[test]
    fn riesz_factorization(seed in any::<u64>(), m in 1usize..4, k in 1usize..3, d in 0usize..3) {
        let mut r = rng(seed);
        let g = 2;
        let n = 1 + (seed as usize) % m;
        let (_, y) = representation(&mut r, g, m, n, 2 * d);
        let words = enumerate_words(g, d);
        let coeffs: Vec<Mat> = words.iter().map(|_| mat(&mut r, k, k)).collect();
        let p = MatrixPoly::from_terms(g, k, words.iter().cloned().zip(coeffs.iter().cloned())).unwrap();
        let lhs = riesz_apply(&y, &p.star().try_mul(&p).unwrap()).unwrap();
        // Σ_i G_iᵀ H_d G_i with G_i[(α, r'), (a, r)] = P_α[i, a] δ_{r' r}
        let h = build_hankel(&y, d).unwrap().flatten();
        let mut rhs = Mat::zeros(k * n, k * n);
        for i in 0..k {
            let mut gi = Mat::zeros(words.len() * n, k * n);
            for (ai, c) in coeffs.iter().enumerate() {
                for a in 0..k {
                    for rr in 0..n {
                        gi[(ai * n + rr, a * n + rr)] = c[(i, a)];
                    }
                }
            }
            rhs += gi.transpose() * &h * gi;
        }
        prop_assert!((lhs - rhs).amax() <= 1e-9 * (1.0 + h.amax()));
    }

    #[test]
    fn localizing_reads_only_low_moments(seed in any::<u64>(), m in 1usize..4, d in 0usize..2) {
        let mut r = rng(seed);
        let p = parse_poly("1 - x1^2 - x2^4", 2).unwrap();
        let need = 2 * d + 4;
        let (_, y) = representation(&mut r, 2, m, 1, need + 3);
        let full = build_localizing(&p, &y, d).unwrap().flatten();
        let cut = build_localizing(&p, &y.truncate(need).unwrap(), d).unwrap().flatten();
        prop_assert_eq!(full, cut);
        prop_assert!(build_localizing(&p, &y.truncate(need - 1).unwrap(), d).is_err());
    }
}
