mod common;

use common::{mat, oracle_min_eig, rng, sym};
use freehull::matops::kron;
use freehull::moments::Isometry;
use freehull::pencils::{compress, pencil_eval, tv_lambda, AffinePencil};
use freehull::{Mat, MatrixTuple};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    /// `Λ(X, Y, W) ⪰ 0 ⇔ W − Y² ⪰ 0 and I − X² − W² ⪰ 0`.
    #[test]
    fn lambda_schur_complements(seed in any::<u64>(), n in 1usize..4) {
        let mut r = rng(seed);
        let x = sym(&mut r, n) * r.gen_range(0.0..1.0);
        let y = sym(&mut r, n) * r.gen_range(0.0..1.0);
        let a = mat(&mut r, n, n);
        let w = &y * &y + (&a * a.transpose()) * r.gen_range(0.0..0.5) - Mat::identity(n, n) * r.gen_range(0.0..0.05);
        let lam = oracle_min_eig(&pencil_eval(&tv_lambda(), &MatrixTuple::new(vec![x.clone(), y.clone()]).unwrap(), std::slice::from_ref(&w), &[]).unwrap());
        let s1 = oracle_min_eig(&(&w - &y * &y));
        let s2 = oracle_min_eig(&(Mat::identity(n, n) - &x * &x - &w * &w));
        prop_assume!(lam.abs() > 1e-7 && s1.abs() > 1e-7 && s2.abs() > 1e-7);
        prop_assert_eq!(lam > 0.0, s1 > 0.0 && s2 > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// `L(VᵀXV) = (I⊗V)ᵀ L(X) (I⊗V)` for monic `L`.
    #[test]
    fn monic_pencils_respect_compressions(seed in any::<u64>(), d in 1usize..4, g in 1usize..3, n in 1usize..5) {
        let mut r = rng(seed);
        let l = AffinePencil::linear(Mat::identity(d, d), (0..g).map(|_| sym(&mut r, d)).collect()).unwrap();
        let x = MatrixTuple::new((0..g).map(|_| sym(&mut r, n)).collect()).unwrap();
        let k = r.gen_range(1..=n);
        let v = Isometry::orthonormalize(&mat(&mut r, n, k)).unwrap();
        let lhs = pencil_eval(&l, &compress(&v, &x).unwrap(), &[], &[]).unwrap();
        let iv = kron(&Mat::identity(d, d), v.matrix());
        let rhs = iv.transpose() * pencil_eval(&l, &x, &[], &[]).unwrap() * &iv;
        prop_assert!((lhs - &rhs).amax() <= 1e-12);
        if oracle_min_eig(&pencil_eval(&l, &x, &[], &[]).unwrap()) >= 0.0 {
            prop_assert!(oracle_min_eig(&rhs) >= -1e-12);
        }
    }
}
