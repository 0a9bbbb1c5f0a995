mod common;

use common::{mat, rng, sym};
use freehull::matops::block_diag;
use freehull::{enumerate_words, eval_poly, Mat, MatrixPoly, MatrixTuple};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_poly(r: &mut ChaCha8Rng, g: usize, dim: usize, deg: usize) -> MatrixPoly {
    let mut terms = Vec::new();
    for w in enumerate_words(g, deg) {
        if r.gen_bool(0.6) {
            terms.push((w, mat(r, dim, dim)));
        }
    }
    MatrixPoly::from_terms(g, dim, terms).unwrap()
}

fn random_tuple(r: &mut ChaCha8Rng, g: usize, n: usize) -> MatrixTuple {
    MatrixTuple::new((0..g).map(|_| sym(r, n)).collect()).unwrap()
}

/// Row `i·(n+m) + r` of `P(A⊕B)` goes to `i·n + r` (first summand) or
/// `ℓn + i·m + (r−n)` (second summand).
fn shuffle(l: usize, n: usize, m: usize) -> Mat {
    let s = n + m;
    let mut p = Mat::zeros(l * s, l * s);
    for i in 0..l {
        for r in 0..s {
            let target = if r < n { i * n + r } else { l * n + i * m + (r - n) };
            p[(target, i * s + r)] = 1.0;
        }
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn evaluation_is_multiplicative(seed in any::<u64>(), g in 1usize..4, n in 1usize..4, dp in 0usize..4, dq in 0usize..4) {
        let mut r = rng(seed);
        let p = random_poly(&mut r, g, 1, dp);
        let q = random_poly(&mut r, g, 1, dq);
        let x = random_tuple(&mut r, g, n);
        let lhs = eval_poly(&p.try_mul(&q).unwrap(), &x).unwrap();
        let rhs = eval_poly(&p, &x).unwrap() * eval_poly(&q, &x).unwrap();
        prop_assert!((lhs - rhs).amax() <= 1e-9);
    }

    #[test]
    fn star_evaluates_to_transpose(seed in any::<u64>(), g in 1usize..4, n in 1usize..4, dim in 1usize..3, deg in 0usize..5) {
        let mut r = rng(seed);
        let p = random_poly(&mut r, g, dim, deg);
        let x = random_tuple(&mut r, g, n);
        let lhs = eval_poly(&p.star(), &x).unwrap();
        let rhs = eval_poly(&p, &x).unwrap().transpose();
        prop_assert!((lhs - rhs).amax() <= 1e-12);
    }

    #[test]
    fn word_count(g in 2usize..5, d in 0usize..6) {
        let expected = (g.pow(d as u32 + 1) - 1) / (g - 1);
        prop_assert_eq!(enumerate_words(g, d).len(), expected);
    }

    #[test]
    fn direct_sum_compatibility(seed in any::<u64>(), g in 1usize..3, n in 1usize..4, m in 1usize..4, l in 1usize..3, deg in 0usize..4) {
        let mut r = rng(seed);
        let p = random_poly(&mut r, g, l, deg);
        let a = random_tuple(&mut r, g, n);
        let b = random_tuple(&mut r, g, m);
        let sum = MatrixTuple::new(a.mats().iter().zip(b.mats()).map(|(x, y)| block_diag(&[x.clone(), y.clone()])).collect()).unwrap();
        let big = eval_poly(&p, &sum).unwrap();
        let s = shuffle(l, n, m);
        let lhs = &s * big * s.transpose();
        let rhs = block_diag(&[eval_poly(&p, &a).unwrap(), eval_poly(&p, &b).unwrap()]);
        prop_assert!((lhs - rhs).amax() <= 1e-12);
    }
}
