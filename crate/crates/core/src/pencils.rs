//! Linear pencils, free spectrahedra and spectrahedrops.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matops::{block_diag, is_psd, is_symmetric, kron, symmetrize, Mat};
use crate::moments::{mat_from_rows, rows_of, Isometry};
use crate::ncpoly::MatrixTuple;
use crate::sdp::{self, AffineMatrixProblem, SolverConfig, SparseSym, Verdict};

/// `L(x, w, v) = A₀ + Σ A_j x_j + Σ S_k w_k + Σ D_l v_l` with symmetric
/// variables `x`, `w` and skew-symmetric variables `v`.
///
/// Evaluation at matrices is `A₀ ⊗ I + Σ A_j ⊗ X_j + …`; the `S_k` are
/// symmetric and the `D_l` skew so that every term is symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePencil {
    pub a0: Mat,
    pub coeffs: Vec<Mat>,
    pub sym_slots: Vec<Mat>,
    pub skew_slots: Vec<Mat>,
}

impl AffinePencil {
    pub fn new(a0: Mat, coeffs: Vec<Mat>, sym_slots: Vec<Mat>, skew_slots: Vec<Mat>) -> Result<Self> {
        let k = a0.nrows();
        let all = std::iter::once(&a0).chain(&coeffs).chain(&sym_slots).chain(&skew_slots);
        for m in all {
            if m.nrows() != k || m.ncols() != k {
                return Err(Error::Shape(format!("pencil coefficients must all be {k}x{k}")));
            }
        }
        for m in std::iter::once(&a0).chain(&coeffs).chain(&sym_slots) {
            if !is_symmetric(m, 1e-12) {
                return Err(Error::NotSymmetric(crate::matops::asymmetry(m)));
            }
        }
        for d in &skew_slots {
            if (d + d.transpose()).amax() > 1e-12 * (1.0 + d.amax()) {
                return Err(Error::Invalid("skew slot coefficient is not skew-symmetric".into()));
            }
        }
        Ok(AffinePencil { a0, coeffs, sym_slots, skew_slots })
    }

    /// Pencil without lifted variables.
    pub fn linear(a0: Mat, coeffs: Vec<Mat>) -> Result<Self> {
        Self::new(a0, coeffs, vec![], vec![])
    }

    pub fn size(&self) -> usize {
        self.a0.nrows()
    }

    pub fn g(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_monic(&self) -> bool {
        self.a0 == Mat::identity(self.size(), self.size())
    }

    pub fn has_lifted(&self) -> bool {
        !self.sym_slots.is_empty() || !self.skew_slots.is_empty()
    }

    /// Direct sum `L ⊕ L'` of pencils with the same slot structure.
    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        if self.g() != other.g()
            || self.sym_slots.len() != other.sym_slots.len()
            || self.skew_slots.len() != other.skew_slots.len()
        {
            return Err(Error::Shape("pencils have different slot structure".into()));
        }
        let pair = |a: &[Mat], b: &[Mat]| -> Vec<Mat> {
            a.iter().zip(b).map(|(x, y)| block_diag(&[x.clone(), y.clone()])).collect()
        };
        Self::new(
            block_diag(&[self.a0.clone(), other.a0.clone()]),
            pair(&self.coeffs, &other.coeffs),
            pair(&self.sym_slots, &other.sym_slots),
            pair(&self.skew_slots, &other.skew_slots),
        )
    }

    pub fn to_file(&self) -> PencilFile {
        let conv = |v: &[Mat]| v.iter().map(rows_of).collect();
        PencilFile {
            size: self.size(),
            g: self.g(),
            h_sym: self.sym_slots.len(),
            h_skew: self.skew_slots.len(),
            a0: rows_of(&self.a0),
            coeffs: conv(&self.coeffs),
            sym_slots: conv(&self.sym_slots),
            skew_slots: conv(&self.skew_slots),
        }
    }

    pub fn from_file(f: &PencilFile) -> Result<Self> {
        let conv = |v: &[Vec<Vec<f64>>]| v.iter().map(|m| mat_from_rows(m)).collect::<Result<Vec<_>>>();
        let p = Self::new(mat_from_rows(&f.a0)?, conv(&f.coeffs)?, conv(&f.sym_slots)?, conv(&f.skew_slots)?)?;
        if p.size() != f.size || p.g() != f.g || p.sym_slots.len() != f.h_sym || p.skew_slots.len() != f.h_skew {
            return Err(Error::Shape("pencil file header disagrees with its matrices".into()));
        }
        Ok(p)
    }
}

/// Pencil file: size, variable counts and dense row-major coefficients.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PencilFile {
    pub size: usize,
    pub g: usize,
    pub h_sym: usize,
    pub h_skew: usize,
    pub a0: Vec<Vec<f64>>,
    pub coeffs: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub sym_slots: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub skew_slots: Vec<Vec<Vec<f64>>>,
}

/// `L(X, W, V)`; `sym` and `skew` give the lifted slot values.
pub fn pencil_eval(l: &AffinePencil, x: &MatrixTuple, sym: &[Mat], skew: &[Mat]) -> Result<Mat> {
    if x.g() != l.g() || sym.len() != l.sym_slots.len() || skew.len() != l.skew_slots.len() {
        return Err(Error::Shape(format!(
            "pencil has {}+{}+{} slots, got {}+{}+{} values",
            l.g(),
            l.sym_slots.len(),
            l.skew_slots.len(),
            x.g(),
            sym.len(),
            skew.len()
        )));
    }
    let n = x.n();
    for m in sym.iter().chain(skew) {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Shape(format!("lifted values must be {n}x{n}")));
        }
    }
    for w in sym {
        if !is_symmetric(w, 1e-12) {
            return Err(Error::Invalid("symmetric slot received a non-symmetric matrix".into()));
        }
    }
    for v in skew {
        if (v + v.transpose()).amax() > 1e-12 * (1.0 + v.amax()) {
            return Err(Error::Invalid("skew slot received a non-skew matrix".into()));
        }
    }
    let mut out = kron(&l.a0, &Mat::identity(n, n));
    for (a, xj) in l.coeffs.iter().zip(x.mats()) {
        out += kron(a, xj);
    }
    for (s, w) in l.sym_slots.iter().zip(sym) {
        out += kron(s, w);
    }
    for (d, v) in l.skew_slots.iter().zip(skew) {
        out += kron(d, v);
    }
    Ok(out)
}

/// `L(X) ⪰ 0` (with the given lifted values), together with `λmin`.
pub fn in_spectrahedron(l: &AffinePencil, x: &MatrixTuple, sym: &[Mat], skew: &[Mat], tol: f64) -> Result<(bool, f64)> {
    is_psd(&symmetrize(&pencil_eval(l, x, sym, skew)?), tol)
}

#[derive(Debug, Clone)]
pub struct SpectrahedropResult {
    pub verdict: Verdict,
    /// Lifted slot values at the solver point (symmetric slots, then skew).
    pub sym: Vec<Mat>,
    pub skew: Vec<Mat>,
}

/// Semidefinite program over the lifted slots of `l` at fixed `x`.
pub fn spectrahedrop_problem(l: &AffinePencil, x: &MatrixTuple, box_radius: f64) -> Result<AffineMatrixProblem> {
    let n = x.n();
    let zeros_sym: Vec<Mat> = vec![Mat::zeros(n, n); l.sym_slots.len()];
    let zeros_skew: Vec<Mat> = vec![Mat::zeros(n, n); l.skew_slots.len()];
    let f0 = symmetrize(&pencil_eval(l, x, &zeros_sym, &zeros_skew)?);
    let mut labels = Vec::new();
    let mut coeffs = Vec::new();
    for (k, s) in l.sym_slots.iter().enumerate() {
        for a in 0..n {
            for b in a..n {
                let mut e = Mat::zeros(n, n);
                e[(a, b)] = 1.0;
                e[(b, a)] = 1.0;
                labels.push(format!("w{k}[{a},{b}]"));
                coeffs.push(SparseSym::from_dense(&kron(s, &e)));
            }
        }
    }
    for (k, d) in l.skew_slots.iter().enumerate() {
        for a in 0..n {
            for b in (a + 1)..n {
                let mut e = Mat::zeros(n, n);
                e[(a, b)] = 1.0;
                e[(b, a)] = -1.0;
                labels.push(format!("v{k}[{a},{b}]"));
                coeffs.push(SparseSym::from_dense(&kron(d, &e)));
            }
        }
    }
    let mut p = AffineMatrixProblem::new(labels, box_radius)?;
    p.push_block("pencil", f0, coeffs)?;
    Ok(p)
}

/// Membership of `x` in the coordinate projection of `D_L`.
pub fn in_spectrahedrop(
    l: &AffinePencil,
    x: &MatrixTuple,
    box_radius: f64,
    cfg: &SolverConfig,
) -> Result<SpectrahedropResult> {
    let problem = spectrahedrop_problem(l, x, box_radius)?;
    let verdict = sdp::solve_with(&problem, cfg)?;
    let n = x.n();
    let (mut sym, mut skew) = (Vec::new(), Vec::new());
    if let Some(u) = &verdict.point {
        let mut it = u.iter();
        for _ in &l.sym_slots {
            let mut w = Mat::zeros(n, n);
            for a in 0..n {
                for b in a..n {
                    let v = *it.next().unwrap();
                    w[(a, b)] = v;
                    w[(b, a)] = v;
                }
            }
            sym.push(w);
        }
        for _ in &l.skew_slots {
            let mut v = Mat::zeros(n, n);
            for a in 0..n {
                for b in (a + 1)..n {
                    let val = *it.next().unwrap();
                    v[(a, b)] = val;
                    v[(b, a)] = -val;
                }
            }
            skew.push(v);
        }
    }
    Ok(SpectrahedropResult { verdict, sym, skew })
}

/// Constants of the monic TV screen lift: `α > 0` and `γ⁴ = 1 + α²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvLiftConstants {
    pub alpha: f64,
    pub gamma_sq: f64,
}

impl TvLiftConstants {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Invalid("α must be positive".into()));
        }
        Ok(TvLiftConstants { alpha, gamma_sq: (1.0 + alpha * alpha).sqrt() })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma_sq.sqrt()
    }
}

fn sym_at(k: usize, entries: &[(usize, usize, f64)]) -> Mat {
    let mut m = Mat::zeros(k, k);
    for &(r, c, v) in entries {
        m[(r, c)] = v;
        m[(c, r)] = v;
    }
    m
}

/// `L₁ ⊕ L₂` in `(x, y)` with the lifted symmetric variable `w`:
///
/// ```text
/// L₁ = [[1, γy], [γy, w + α]]
/// L₂ = [[1, 0, γ²x], [0, 1, w], [γ²x, w, 1 − 2αw]]
/// ```
pub fn tv_lift(c: TvLiftConstants) -> AffinePencil {
    let g = c.gamma();
    let l1_0 = sym_at(2, &[(0, 0, 1.0), (1, 1, c.alpha)]);
    let l1_y = sym_at(2, &[(0, 1, g)]);
    let l1_w = sym_at(2, &[(1, 1, 1.0)]);
    let l2_0 = Mat::identity(3, 3);
    let l2_x = sym_at(3, &[(0, 2, c.gamma_sq)]);
    let l2_w = sym_at(3, &[(1, 2, 1.0), (2, 2, -2.0 * c.alpha)]);
    let z2 = Mat::zeros(2, 2);
    let z3 = Mat::zeros(3, 3);
    AffinePencil::new(
        block_diag(&[l1_0, l2_0]),
        vec![block_diag(&[z2.clone(), l2_x]), block_diag(&[l1_y, z3])],
        vec![block_diag(&[l1_w, l2_w])],
        vec![],
    )
    .expect("TV lift coefficients are symmetric")
}

/// The classical (non-monic) lift `Λ = [[1,0,x],[0,1,w],[x,w,1]] ⊕ [[1,y],[y,w]]`.
pub fn tv_lambda() -> AffinePencil {
    let a0 = block_diag(&[Mat::identity(3, 3), sym_at(2, &[(0, 0, 1.0)])]);
    let ax = block_diag(&[sym_at(3, &[(0, 2, 1.0)]), Mat::zeros(2, 2)]);
    let ay = block_diag(&[Mat::zeros(3, 3), sym_at(2, &[(0, 1, 1.0)])]);
    let aw = block_diag(&[sym_at(3, &[(1, 2, 1.0)]), sym_at(2, &[(1, 1, 1.0)])]);
    AffinePencil::new(a0, vec![ax, ay], vec![aw], vec![]).expect("Λ coefficients are symmetric")
}

/// Scalar affine functional `ℓ(x) = c₀ + Σ c_j x_j`, evaluated at matrices
/// as `c₀ I + Σ c_j X_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineFunctional {
    pub c0: f64,
    pub coeffs: Vec<f64>,
}

impl AffineFunctional {
    pub fn eval(&self, x: &MatrixTuple) -> Mat {
        let n = x.n();
        let mut out = Mat::identity(n, n) * self.c0;
        for (c, xj) in self.coeffs.iter().zip(x.mats()) {
            out += xj * *c;
        }
        out
    }
}

/// Given `X ∈ D_L(n)` with `ℓ(X) ⋡ 0`, the scalar point `v*Xv` for a unit
/// eigenvector `v` of `ℓ(X)` with negative eigenvalue. It lies in `D_L(1)` and
/// `ℓ(v*Xv) < 0`.
pub fn scalar_witness(l: &AffinePencil, f: &AffineFunctional, x: &MatrixTuple) -> Result<Vec<f64>> {
    if f.coeffs.len() != x.g() || l.g() != x.g() {
        return Err(Error::Shape("functional, pencil and point disagree on g".into()));
    }
    let e = crate::matops::sym_eig(&symmetrize(&f.eval(x)))?;
    if e.min() >= 0.0 {
        return Err(Error::NoSeparation(format!("ℓ(X) is PSD (λmin = {:.3e})", e.min())));
    }
    let v = e.vectors.column(0).into_owned();
    Ok(x.mats().iter().map(|xj| v.dot(&(xj * &v))).collect())
}

/// `X¹ ⊕ X² ⊕ …` entrywise.
pub fn direct_sum(tuples: &[MatrixTuple]) -> Result<MatrixTuple> {
    let g = tuples.first().map(MatrixTuple::g).ok_or_else(|| Error::Invalid("empty direct sum".into()))?;
    if tuples.iter().any(|t| t.g() != g) {
        return Err(Error::Shape("direct sum of tuples with different g".into()));
    }
    MatrixTuple::new((0..g).map(|j| block_diag(&tuples.iter().map(|t| t.get(j).clone()).collect::<Vec<_>>())).collect())
}

/// `V*XV` entrywise.
pub fn compress(v: &Isometry, x: &MatrixTuple) -> Result<MatrixTuple> {
    if v.rows() != x.n() {
        return Err(Error::Shape(format!("isometry has {} rows, tuple is {}x{}", v.rows(), x.n(), x.n())));
    }
    let m = v.matrix();
    MatrixTuple::new(x.mats().iter().map(|xj| symmetrize(&(m.transpose() * xj * m))).collect())
}

/// Matrix convex combination `Σ V_ℓ* X^ℓ V_ℓ` with `Σ V_ℓ* V_ℓ = I`.
pub fn convex_combination(vs: &[Mat], xs: &[MatrixTuple]) -> Result<MatrixTuple> {
    if vs.len() != xs.len() || vs.is_empty() {
        return Err(Error::Shape("need one contraction per tuple".into()));
    }
    let n = vs[0].ncols();
    let g = xs[0].g();
    let mut partition = Mat::zeros(n, n);
    for (v, x) in vs.iter().zip(xs) {
        if v.ncols() != n || v.nrows() != x.n() || x.g() != g {
            return Err(Error::Shape("contraction shapes do not match the tuples".into()));
        }
        partition += v.transpose() * v;
    }
    let err = (partition - Mat::identity(n, n)).amax();
    if err > 1e-9 {
        return Err(Error::Invalid(format!("Σ V*V deviates from I by {err:.3e}")));
    }
    let mut out = vec![Mat::zeros(n, n); g];
    for (v, x) in vs.iter().zip(xs) {
        for (o, xj) in out.iter_mut().zip(x.mats()) {
            *o += v.transpose() * xj * v;
        }
    }
    MatrixTuple::new(out.iter().map(symmetrize).collect())
}
