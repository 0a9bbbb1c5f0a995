//! Dense real matrix kernel.
//!
//! Everything here operates on `nalgebra::DMatrix<f64>`. The symmetric
//! eigensolver is a Householder tridiagonalization followed by implicit QL
//! with Wilkinson-style shifts; every PSD test in the crate goes through it.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// Default absolute tolerance on the smallest eigenvalue for PSD tests.
pub const DEFAULT_PSD_TOL: f64 = 1e-9;

/// Relative symmetry tolerance accepted by [`sym_eig`].
const SYM_TOL: f64 = 1e-12;

/// Eigen-decomposition of a symmetric matrix: `m = vectors * diag(values) * vectors^T`,
/// values ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

impl SymEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Rebuild `V f(Λ) V^T`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let s = f(lam);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        &scaled * self.vectors.transpose()
    }
}

/// Largest absolute entry, used as the scale for relative symmetry checks.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn asymmetry(m: &Mat) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn is_symmetric(m: &Mat, rel_tol: f64) -> bool {
    m.is_square() && asymmetry(m) <= rel_tol * (1.0 + max_abs(m))
}

/// `(m + m^T) / 2`.
pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Symmetric eigendecomposition with ascending eigenvalues.
pub fn sym_eig(m: &Mat) -> Result<SymEigen> {
    if !m.is_square() {
        return Err(Error::Shape(format!("eigendecomposition needs a square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    if !is_symmetric(m, SYM_TOL.max(1e-10)) {
        return Err(Error::NotSymmetric(asymmetry(m)));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(SymEigen { values: vec![], vectors: Mat::zeros(0, 0) });
    }
    // row-major working copy of the symmetrized input
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e);
    implicit_ql(n, &mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| v[i * n + order[j]]);
    Ok(SymEigen { values, vectors })
}

fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn implicit_ql(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let at = |i: usize, j: usize| i * n + j;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let cap = 30 * n.max(1);
    let mut sweeps = 0usize;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                sweeps += 1;
                if sweeps > cap {
                    return Err(Error::NoConvergence(format!("implicit QL exceeded {cap} sweeps on a {n}x{n} matrix")));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[at(k, i + 1)];
                        v[at(k, i + 1)] = s * v[at(k, i)] + c * h;
                        v[at(k, i)] = c * v[at(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig(m: &Mat) -> Result<f64> {
    Ok(sym_eig(m)?.min())
}

/// `λmin(m) >= -tol`, together with `λmin`.
pub fn is_psd(m: &Mat, tol: f64) -> Result<(bool, f64)> {
    let lam = min_eig(m)?;
    Ok((lam >= -tol, lam))
}

/// Principal (PSD) square root. Eigenvalues in `[-1e-10, 0)` are clamped.
pub fn principal_sqrt(m: &Mat) -> Result<Mat> {
    let eig = sym_eig(m)?;
    if eig.min() < -1e-10 {
        return Err(Error::NotPsd(eig.min()));
    }
    Ok(symmetrize(&eig.map(|l| l.max(0.0).sqrt())))
}

/// Inverse principal square root of a positive definite matrix.
pub fn inv_sqrt(m: &Mat) -> Result<Mat> {
    let eig = sym_eig(m)?;
    if eig.min() <= 0.0 {
        return Err(Error::NotPsd(eig.min()));
    }
    Ok(symmetrize(&eig.map(|l| 1.0 / l.sqrt())))
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Spectral norm of a general matrix (square root of `λmax(mᵀm)`).
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = symmetrize(&(m.transpose() * m));
    sym_eig(&gram).map(|e| e.max().max(0.0).sqrt()).unwrap_or_else(|_| m.norm())
}

/// Block diagonal matrix from square blocks.
pub fn block_diag(blocks: &[Mat]) -> Mat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Labelled block matrix, the layout carrier for Hankel and localizing matrices.
///
/// Blocks are stored row-major over the label grid; `flatten` places block
/// `(i, j)` at the offsets implied by the preceding block dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub row_dims: Vec<usize>,
    pub col_dims: Vec<usize>,
    blocks: Vec<Mat>,
}

impl BlockMatrix {
    pub fn new(row_labels: Vec<String>, col_labels: Vec<String>, row_dims: Vec<usize>, col_dims: Vec<usize>) -> Self {
        assert_eq!(row_labels.len(), row_dims.len());
        assert_eq!(col_labels.len(), col_dims.len());
        let mut blocks = Vec::with_capacity(row_dims.len() * col_dims.len());
        for &r in &row_dims {
            for &c in &col_dims {
                blocks.push(Mat::zeros(r, c));
            }
        }
        BlockMatrix { row_labels, col_labels, row_dims, col_dims, blocks }
    }

    pub fn block_rows(&self) -> usize {
        self.row_dims.len()
    }

    pub fn block_cols(&self) -> usize {
        self.col_dims.len()
    }

    pub fn block(&self, i: usize, j: usize) -> &Mat {
        &self.blocks[i * self.col_dims.len() + j]
    }

    pub fn set_block(&mut self, i: usize, j: usize, value: Mat) -> Result<()> {
        if value.nrows() != self.row_dims[i] || value.ncols() != self.col_dims[j] {
            return Err(Error::Shape(format!(
                "block ({i},{j}) expects {}x{}, got {}x{}",
                self.row_dims[i],
                self.col_dims[j],
                value.nrows(),
                value.ncols()
            )));
        }
        let k = i * self.col_dims.len() + j;
        self.blocks[k] = value;
        Ok(())
    }

    pub fn flatten(&self) -> Mat {
        let rows: usize = self.row_dims.iter().sum();
        let cols: usize = self.col_dims.iter().sum();
        let mut out = Mat::zeros(rows, cols);
        let mut r0 = 0;
        for i in 0..self.row_dims.len() {
            let mut c0 = 0;
            for j in 0..self.col_dims.len() {
                let b = self.block(i, j);
                out.view_mut((r0, c0), (b.nrows(), b.ncols())).copy_from(b);
                c0 += self.col_dims[j];
            }
            r0 += self.row_dims[i];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2(a: f64, b: f64, c: f64, d: f64) -> Mat {
        Mat::from_row_slice(2, 2, &[a, b, c, d])
    }

    #[test]
    fn identity_eigenvalues() {
        let e = sym_eig(&Mat::identity(3, 3)).unwrap();
        assert_eq!(e.values.len(), 3);
        for v in e.values {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn two_by_two_eigenvalues() {
        let e = sym_eig(&m2(2.0, 1.0, 1.0, 1.0)).unwrap();
        let s5 = 5f64.sqrt();
        assert!((e.values[0] - (3.0 - s5) / 2.0).abs() < 1e-12);
        assert!((e.values[1] - (3.0 + s5) / 2.0).abs() < 1e-12);
        assert!((e.values[0] - 0.381966).abs() < 1e-6);

        let e = sym_eig(&m2(4.0, 3.0, 3.0, 2.0)).unwrap();
        let s10 = 10f64.sqrt();
        assert!((e.values[0] - (3.0 - s10)).abs() < 1e-12);
        assert!((e.values[1] - (3.0 + s10)).abs() < 1e-12);
    }

    #[test]
    fn eig_rejects_bad_input() {
        assert!(matches!(sym_eig(&Mat::zeros(2, 3)), Err(Error::Shape(_))));
        assert!(matches!(sym_eig(&m2(1.0, 2.0, 0.0, 1.0)), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn psd_examples() {
        let (ok, lam) = is_psd(&Mat::zeros(3, 3), 1e-9).unwrap();
        assert!(ok && lam == 0.0);
        let (ok, lam) = is_psd(&m2(4.0, 3.0, 3.0, 2.0), 1e-9).unwrap();
        assert!(!ok);
        assert!((lam + 0.162278).abs() < 1e-6);
        let (ok, lam) = is_psd(&m2(1.0, 1.0, 1.0, 1.0), 1e-9).unwrap();
        assert!(ok && lam.abs() < 1e-14);
    }

    #[test]
    fn sqrt_examples() {
        let r = principal_sqrt(&Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 9.0]))).unwrap();
        assert!((r[(0, 0)] - 2.0).abs() < 1e-14 && (r[(1, 1)] - 3.0).abs() < 1e-14);
        assert!(r[(0, 1)].abs() < 1e-14);
        let id = Mat::identity(4, 4);
        assert!((principal_sqrt(&id).unwrap() - &id).norm() < 1e-14);

        let mu = (3.0 - 5f64.sqrt()) / 2.0;
        let w = m2(2.0, 1.0, 1.0, 1.0) * mu;
        let target = Mat::identity(2, 2) - &w * &w;
        let r = principal_sqrt(&target).unwrap();
        let e = sym_eig(&r).unwrap();
        assert!(e.values[0].abs() < 1e-7);
        assert!((e.values[1] - (1.0 - mu.powi(4)).sqrt()).abs() < 1e-12);
        assert!((e.values[1] - 0.989_299_6).abs() < 1e-6);
        assert!((&r * &r - &target).norm() < 1e-12);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        assert!(matches!(principal_sqrt(&m2(4.0, 3.0, 3.0, 2.0)), Err(Error::NotPsd(_))));
    }

    #[test]
    fn kron_examples() {
        let k = kron(&Mat::identity(2, 2), &Mat::identity(3, 3));
        assert_eq!(k, Mat::identity(6, 6));
        let swap = m2(0.0, 1.0, 1.0, 0.0);
        let d = m2(1.0, 0.0, 0.0, 2.0);
        let k = kron(&swap, &d);
        let expected = Mat::from_row_slice(
            4,
            4,
            &[
                0.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, 2.0, //
                1.0, 0.0, 0.0, 0.0, //
                0.0, 2.0, 0.0, 0.0,
            ],
        );
        assert_eq!(k, expected);
        let k = kron(&Mat::zeros(2, 3), &Mat::zeros(4, 5));
        assert_eq!((k.nrows(), k.ncols()), (8, 15));
    }

    #[test]
    fn block_matrix_flatten() {
        let mut b =
            BlockMatrix::new(vec!["a".into(), "b".into()], vec!["a".into(), "b".into()], vec![1, 2], vec![1, 2]);
        b.set_block(0, 1, Mat::from_row_slice(1, 2, &[1.0, 2.0])).unwrap();
        b.set_block(1, 1, Mat::identity(2, 2)).unwrap();
        assert!(b.set_block(0, 0, Mat::identity(2, 2)).is_err());
        let f = b.flatten();
        assert_eq!(f[(0, 1)], 1.0);
        assert_eq!(f[(0, 2)], 2.0);
        assert_eq!(f[(2, 2)], 1.0);
        assert_eq!(f[(1, 0)], 0.0);
    }
}
