use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::ser_mats;
use crate::matops::{min_eig, sym_eig, symmetrize, Mat};
use crate::ncpoly::{enumerate_words, MatrixPoly, Word};
use crate::sdp::{self, AffineMatrixProblem, SolverConfig, SparseSym, Verdict};

/// Gram data for `q = Σ s_i* s_i + Σ f_j* p f_j`.
#[derive(Debug, Clone, Serialize)]
pub struct QuadModuleCertificate {
    pub sos_basis: Vec<String>,
    #[serde(serialize_with = "ser_mats")]
    pub sos_grams: Vec<Mat>,
    /// `(word, coefficient row)` pairs indexing the localizing Gram.
    pub loc_basis: Vec<(String, usize)>,
    #[serde(serialize_with = "ser_mats")]
    pub loc_grams: Vec<Mat>,
    #[serde(skip)]
    pub sos_polys: Vec<MatrixPoly>,
    /// Each `f_j` as its list of scalar entries (an `ℓ×1` column).
    #[serde(skip)]
    pub loc_polys: Vec<Vec<MatrixPoly>>,
    /// Largest coefficient of `q − Σ s*s − Σ f*pf` after expansion.
    pub residual: f64,
    pub min_gram_eig: f64,
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub enum QuadModuleOutcome {
    Found(QuadModuleCertificate),
    NotFound { reason: String, verdict: Option<Verdict> },
}

impl QuadModuleOutcome {
    pub fn is_found(&self) -> bool {
        matches!(self, QuadModuleOutcome::Found(_))
    }
}

/// Scalar entry `(i, j)` of a matrix polynomial.
fn entry(p: &MatrixPoly, i: usize, j: usize) -> MatrixPoly {
    let terms = p.terms().map(|(w, c)| (w.clone(), Mat::from_element(1, 1, c[(i, j)])));
    MatrixPoly::from_terms(p.g(), 1, terms).expect("entries of a valid polynomial")
}

/// `f* p f` for an `ℓ×1` column `f` of scalar polynomials.
fn sandwich(f: &[MatrixPoly], p: &MatrixPoly) -> Result<MatrixPoly> {
    let l = p.dim();
    if f.len() != l {
        return Err(Error::Shape(format!("f has {} entries, p is {l}x{l}", f.len())));
    }
    let mut out = MatrixPoly::zero(p.g(), 1);
    for i in 0..l {
        for j in 0..l {
            let pij = entry(p, i, j);
            if pij.is_zero() {
                continue;
            }
            out = out.try_add(&f[i].star().try_mul(&pij)?.try_mul(&f[j])?)?;
        }
    }
    Ok(out)
}

/// `K² − Σ x_j² − Σ s_i* s_i − Σ f_j* p f_j`, expanded exactly.
pub fn archimedean_residual(k_sq: f64, p: &MatrixPoly, s: &[MatrixPoly], f: &[Vec<MatrixPoly>]) -> Result<MatrixPoly> {
    let g = p.g();
    let mut r = MatrixPoly::constant(g, 1, k_sq);
    for j in 1..=g {
        r = r.try_sub(&MatrixPoly::monomial(g, Word::new([j, j]), 1.0))?;
    }
    for si in s {
        r = r.try_sub(&si.star().try_mul(si)?)?;
    }
    for fj in f {
        r = r.try_sub(&sandwich(fj, p)?)?;
    }
    Ok(r)
}

/// Exact check of `K² − Σ x_j² = Σ s_i* s_i + Σ f_j* p f_j`.
pub fn verify_archimedean_identity(k_sq: f64, p: &MatrixPoly, s: &[MatrixPoly], f: &[Vec<MatrixPoly>]) -> Result<bool> {
    Ok(archimedean_residual(k_sq, p, s, f)?.is_zero())
}

struct GramLayout {
    /// `(row, col)` of each upper-triangle Gram entry.
    entries: Vec<(usize, usize)>,
    dim: usize,
}

impl GramLayout {
    fn new(dim: usize) -> Self {
        let entries = (0..dim).flat_map(|a| (a..dim).map(move |b| (a, b))).collect();
        GramLayout { entries, dim }
    }

    fn matrix(&self, vals: &[f64]) -> Mat {
        let mut m = Mat::zeros(self.dim, self.dim);
        for (&(a, b), v) in self.entries.iter().zip(vals) {
            m[(a, b)] = *v;
            m[(b, a)] = *v;
        }
        m
    }
}

/// Searches `q ∈ Σ_α + {Σ f* p f : deg f <= β}` with Gram matrices.
///
/// The coefficient identities are solved exactly for a particular Gram pair
/// and a nullspace basis; the SDP then maximizes the smallest Gram eigenvalue
/// over the affine solution set.
pub fn quad_module_membership(
    q: &MatrixPoly,
    p: &MatrixPoly,
    alpha: usize,
    beta: usize,
    cfg: &SolverConfig,
) -> Result<QuadModuleOutcome> {
    if q.dim() != 1 {
        return Err(Error::Shape("q must be a scalar polynomial".into()));
    }
    if q.g() != p.g() {
        return Err(Error::Shape("q and p use different variable counts".into()));
    }
    if !q.is_numerically_symmetric() || !p.is_numerically_symmetric() {
        return Err(Error::Invalid("q and p must be symmetric".into()));
    }
    let (q, p) = (&q.symmetric_part(), &p.symmetric_part());
    let cap = (2 * alpha).max(2 * beta + p.degree());
    if q.degree() > cap {
        return Err(Error::InsufficientDegree { have: cap, need: q.degree() });
    }
    let g = p.g();
    let l = p.dim();
    let sbasis = enumerate_words(g, alpha);
    let lwords = enumerate_words(g, beta);
    let lbasis: Vec<(Word, usize)> = lwords.iter().flat_map(|w| (0..l).map(move |i| (w.clone(), i))).collect();
    let sg = GramLayout::new(sbasis.len());
    let lg = GramLayout::new(lbasis.len());
    let np = sg.entries.len() + lg.entries.len();

    // Coefficient rows indexed by all words up to the cap.
    let words = enumerate_words(g, cap);
    let row_of: std::collections::HashMap<Word, usize> =
        words.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
    let mut a = Mat::zeros(words.len(), np);
    for (k, &(u, v)) in sg.entries.iter().enumerate() {
        let w = sbasis[u].sandwich(&Word::empty(), &sbasis[v]);
        a[(row_of[&w], k)] += 1.0;
        if u != v {
            a[(row_of[&w.star()], k)] += 1.0;
        }
    }
    for (k, &(u, v)) in lg.entries.iter().enumerate() {
        let col = sg.entries.len() + k;
        let (wu, i) = &lbasis[u];
        let (wv, j) = &lbasis[v];
        for (gamma, c) in p.terms() {
            a[(row_of[&wu.sandwich(gamma, wv)], col)] += c[(*i, *j)];
            if u != v {
                a[(row_of[&wv.sandwich(gamma, wu)], col)] += c[(*j, *i)];
            }
        }
    }
    let b = nalgebra::DVector::from_iterator(words.len(), words.iter().map(|w| q.coefficient(w)[(0, 0)]));

    // Particular solution and nullspace from the eigendecomposition of AᵀA.
    let ata = a.transpose() * &a;
    let e = sym_eig(&symmetrize(&ata))?;
    let lmax = e.max().max(1e-300);
    let atb = a.transpose() * &b;
    let mut g0 = nalgebra::DVector::zeros(np);
    let mut null = Vec::new();
    for (k, lam) in e.values.iter().enumerate() {
        let v = e.vectors.column(k);
        if *lam > 1e-12 * lmax {
            g0 += v * (v.dot(&atb) / lam);
        } else {
            null.push(v.into_owned());
        }
    }
    let lin_res = (&a * &g0 - &b).amax();
    if lin_res > 1e-9 * (1.0 + b.amax()) {
        return Ok(QuadModuleOutcome::NotFound {
            reason: format!("coefficient identities are inconsistent (residual {lin_res:.3e})"),
            verdict: None,
        });
    }

    let split = |vals: &nalgebra::DVector<f64>| -> (Mat, Mat) {
        let s: Vec<f64> = vals.iter().take(sg.entries.len()).copied().collect();
        let t: Vec<f64> = vals.iter().skip(sg.entries.len()).copied().collect();
        (sg.matrix(&s), lg.matrix(&t))
    };
    let (s0, l0) = split(&g0);
    let labels = (0..null.len()).map(|k| format!("null[{k}]")).collect();
    let radius = 1e3 * (1.0 + b.amax());
    let mut problem = AffineMatrixProblem::new(labels, radius)?;
    let (mut sc, mut lc) = (Vec::new(), Vec::new());
    for v in &null {
        let (s, t) = split(v);
        sc.push(SparseSym::from_dense(&s));
        lc.push(SparseSym::from_dense(&t));
    }
    if sg.dim > 0 {
        problem.push_block("sos", s0.clone(), sc)?;
    }
    if lg.dim > 0 {
        problem.push_block("loc", l0.clone(), lc)?;
    }
    let verdict = sdp::solve_with(&problem, cfg)?;
    if verdict.status == sdp::Status::Infeasible {
        return Ok(QuadModuleOutcome::NotFound {
            reason: format!("Gram matrices cannot be PSD (margin {:.3e})", verdict.margin),
            verdict: Some(verdict),
        });
    }
    let u = verdict.point.clone().unwrap_or_default();
    let mut gv = g0.clone();
    for (ui, v) in u.iter().zip(&null) {
        gv += v * *ui;
    }
    let (sgram, lgram) = split(&gv);
    let min_gram_eig = min_eig(&sgram)?.min(min_eig(&lgram)?);
    if min_gram_eig < -1e-7 {
        return Ok(QuadModuleOutcome::NotFound {
            reason: format!("best Gram pair has λmin = {min_gram_eig:.3e}"),
            verdict: Some(verdict),
        });
    }

    // Factor the Grams into explicit polynomials and re-expand.
    let sos_polys = factor_gram(&sgram, |k| MatrixPoly::monomial(g, sbasis[k].clone(), 1.0), g)?;
    let loc_polys: Vec<Vec<MatrixPoly>> = {
        let e = sym_eig(&lgram)?;
        let mut out = Vec::new();
        for (k, lam) in e.values.iter().enumerate() {
            if *lam <= 0.0 {
                continue;
            }
            let scale = lam.sqrt();
            let mut f = vec![MatrixPoly::zero(g, 1); l];
            for (r, (w, i)) in lbasis.iter().enumerate() {
                let c = e.vectors[(r, k)] * scale;
                if c != 0.0 {
                    f[*i] = f[*i].try_add(&MatrixPoly::monomial(g, w.clone(), c))?;
                }
            }
            out.push(f);
        }
        out
    };
    let mut recon = MatrixPoly::zero(g, 1);
    for s in &sos_polys {
        recon = recon.try_add(&s.star().try_mul(s)?)?;
    }
    for f in &loc_polys {
        recon = recon.try_add(&sandwich(f, p)?)?;
    }
    let residual = q.try_sub(&recon)?.max_coeff();
    if residual > 1e-7 {
        return Ok(QuadModuleOutcome::NotFound {
            reason: format!("expanded certificate misses q by {residual:.3e}"),
            verdict: Some(verdict),
        });
    }
    Ok(QuadModuleOutcome::Found(QuadModuleCertificate {
        sos_basis: sbasis.iter().map(Word::key).collect(),
        sos_grams: vec![sgram],
        loc_basis: lbasis.iter().map(|(w, i)| (w.key(), *i)).collect(),
        loc_grams: vec![lgram],
        sos_polys,
        loc_polys,
        residual,
        min_gram_eig,
        margin: verdict.margin,
    }))
}

fn factor_gram(gram: &Mat, mono: impl Fn(usize) -> MatrixPoly, g: usize) -> Result<Vec<MatrixPoly>> {
    let e = sym_eig(gram)?;
    let mut out = Vec::new();
    for (k, lam) in e.values.iter().enumerate() {
        if *lam <= 0.0 {
            continue;
        }
        let scale = lam.sqrt();
        let mut s = MatrixPoly::zero(g, 1);
        for r in 0..gram.nrows() {
            let c = e.vectors[(r, k)] * scale;
            if c != 0.0 {
                s = s.try_add(&mono(r).scale(c))?;
            }
        }
        out.push(s);
    }
    Ok(out)
}
