use serde::Serialize;

use crate::error::{Error, Result};
use crate::matops::{inv_sqrt, kron, min_eig, symmetrize, Mat};
use crate::moments::MomentSequence;
use crate::ncpoly::{enumerate_words, MatrixPoly, MatrixTuple, Word};
use crate::pencils::AffinePencil;
use crate::sdp::{AffineMatrixProblem, SparseSym};

use super::moment_degree;

/// `Δ(x, y) = A₀ + Σ A_j x_j + Σ S_c y_c + Σ (B_c y_c + B_cᵀ y_c*)`.
///
/// `y_c` ranges over moment classes of length `>= 2`; palindromic classes
/// carry a symmetric variable with coefficient `S_c`, the others a general
/// variable with coefficient `B_c`. Rows are indexed by Hankel words followed
/// by (localizing word, coefficient index) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedPencil {
    pub a0: Mat,
    pub coeffs: Vec<Mat>,
    pub sym_slots: Vec<(Word, Mat)>,
    pub general_slots: Vec<(Word, Mat)>,
    pub hankel_size: usize,
}

impl MixedPencil {
    pub fn size(&self) -> usize {
        self.a0.nrows()
    }

    pub fn g(&self) -> usize {
        self.coeffs.len()
    }

    pub fn num_lifted(&self) -> usize {
        self.sym_slots.len() + self.general_slots.len()
    }

    /// `Δ(X, Y)`.
    pub fn eval(&self, x: &MatrixTuple, sym: &[Mat], general: &[Mat]) -> Result<Mat> {
        if x.g() != self.g() || sym.len() != self.sym_slots.len() || general.len() != self.general_slots.len() {
            return Err(Error::Shape("slot count mismatch in Δ evaluation".into()));
        }
        let n = x.n();
        let mut out = kron(&self.a0, &Mat::identity(n, n));
        for (a, xj) in self.coeffs.iter().zip(x.mats()) {
            out += kron(a, xj);
        }
        for ((_, s), y) in self.sym_slots.iter().zip(sym) {
            out += kron(s, y);
        }
        for ((_, b), y) in self.general_slots.iter().zip(general) {
            out += kron(b, y) + kron(&b.transpose(), &y.transpose());
        }
        Ok(out)
    }

    /// Slot values read from a moment sequence.
    pub fn slot_values(&self, y: &MomentSequence) -> (Vec<Mat>, Vec<Mat>) {
        (
            self.sym_slots.iter().map(|(w, _)| y.get(w)).collect(),
            self.general_slots.iter().map(|(w, _)| y.get(w)).collect(),
        )
    }

    /// SDP over the lifted slots at fixed `x`.
    pub fn projection_problem(&self, x: &MatrixTuple, box_radius: f64) -> Result<AffineMatrixProblem> {
        let n = x.n();
        let f0 = symmetrize(&self.eval(
            x,
            &vec![Mat::zeros(n, n); self.sym_slots.len()],
            &vec![Mat::zeros(n, n); self.general_slots.len()],
        )?);
        let mut labels = Vec::new();
        let mut coeffs = Vec::new();
        for (w, s) in &self.sym_slots {
            for a in 0..n {
                for b in a..n {
                    let mut e = Mat::zeros(n, n);
                    e[(a, b)] = 1.0;
                    e[(b, a)] = 1.0;
                    labels.push(format!("Y[{}]({a},{b})", w.key()));
                    coeffs.push(SparseSym::from_dense(&kron(s, &e)));
                }
            }
        }
        for (w, bm) in &self.general_slots {
            for a in 0..n {
                for b in 0..n {
                    let mut e = Mat::zeros(n, n);
                    e[(a, b)] = 1.0;
                    labels.push(format!("Y[{}]({a},{b})", w.key()));
                    let m = kron(bm, &e);
                    coeffs.push(SparseSym::from_dense(&(&m + m.transpose())));
                }
            }
        }
        let mut p = AffineMatrixProblem::new(labels, box_radius)?;
        p.push_block("delta", f0, coeffs)?;
        Ok(p)
    }
}

/// The linear matrix polynomial whose free spectrahedron is `L_p(·; d)`.
pub fn build_mixed_pencil(p: &MatrixPoly, d: usize) -> Result<MixedPencil> {
    if !p.is_numerically_symmetric() {
        return Err(Error::Invalid("p is not symmetric (p* ≠ p)".into()));
    }
    let p = &p.symmetric_part();
    let g = p.g();
    let l = p.dim();
    let dmax = moment_degree(p, d);
    let hwords = enumerate_words(g, d + p.degree().div_ceil(2));
    let lwords = enumerate_words(g, d);
    let hs = hwords.len();
    let k = hs + lwords.len() * l;

    let mut sym_slots = Vec::new();
    let mut general_slots = Vec::new();
    let mut slot_of = std::collections::HashMap::new();
    for w in enumerate_words(g, dmax) {
        if w.len() < 2 || w.class_rep().1 {
            continue;
        }
        if w.is_palindrome() {
            slot_of.insert(w.clone(), (true, sym_slots.len()));
            sym_slots.push((w, Mat::zeros(k, k)));
        } else {
            slot_of.insert(w.clone(), (false, general_slots.len()));
            general_slots.push((w, Mat::zeros(k, k)));
        }
    }
    let mut a0 = Mat::zeros(k, k);
    let mut coeffs = vec![Mat::zeros(k, k); g];

    let mut put = |row: usize, col: usize, w: &Word, v: f64| {
        let (rep, flipped) = w.class_rep();
        match rep.len() {
            0 => a0[(row, col)] += v,
            1 => coeffs[rep.max_letter() - 1][(row, col)] += v,
            _ => match slot_of[&rep] {
                (true, i) => sym_slots[i].1[(row, col)] += v,
                (false, i) if !flipped => general_slots[i].1[(row, col)] += v,
                _ => {}
            },
        }
    };
    for (ai, a) in hwords.iter().enumerate() {
        for (bi, b) in hwords.iter().enumerate() {
            put(ai, bi, &a.sandwich(&Word::empty(), b), 1.0);
        }
    }
    for (ai, a) in lwords.iter().enumerate() {
        for (bi, b) in lwords.iter().enumerate() {
            for (gamma, c) in p.terms() {
                let w = a.sandwich(gamma, b);
                for i in 0..l {
                    for j in 0..l {
                        if c[(i, j)] != 0.0 {
                            put(hs + ai * l + i, hs + bi * l + j, &w, c[(i, j)]);
                        }
                    }
                }
            }
        }
    }
    Ok(MixedPencil { a0, coeffs, sym_slots, general_slots, hankel_size: hs })
}

/// Where a symmetric slot of the split pencil comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SymSlotSource {
    /// A palindromic slot of `Δ`, copied unchanged.
    Palindromic(usize),
    /// `2C = B + Bᵀ` of a general slot.
    SymmetricPart(usize),
}

/// `L(x, w, v) = A₀ + Σ A_j x_j + Σ S_c y_c + 2 Σ (C_c w_c + D_c v_c)` with
/// `C = (B+Bᵀ)/2` on symmetric `w` and `D = (B−Bᵀ)/2` on skew `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetrizedPencil {
    pub pencil: AffinePencil,
    pub sym_sources: Vec<SymSlotSource>,
    /// General slot index behind each skew slot (zero `D` are dropped).
    pub skew_sources: Vec<usize>,
}

impl SymmetrizedPencil {
    /// Splits general values `Y = W + V` and arranges all slot values for
    /// evaluating the symmetrized pencil.
    pub fn lift_values(&self, sym: &[Mat], general: &[Mat]) -> (Vec<Mat>, Vec<Mat>) {
        let w: Vec<Mat> = self
            .sym_sources
            .iter()
            .map(|s| match *s {
                SymSlotSource::Palindromic(i) => sym[i].clone(),
                SymSlotSource::SymmetricPart(i) => (&general[i] + general[i].transpose()) * 0.5,
            })
            .collect();
        let v: Vec<Mat> = self.skew_sources.iter().map(|&i| (&general[i] - general[i].transpose()) * 0.5).collect();
        (w, v)
    }
}

pub fn split_symmetrize(delta: &MixedPencil) -> Result<SymmetrizedPencil> {
    let mut sym_slots = Vec::new();
    let mut sym_sources = Vec::new();
    let mut skew_slots = Vec::new();
    let mut skew_sources = Vec::new();
    for (i, (_, s)) in delta.sym_slots.iter().enumerate() {
        sym_slots.push(s.clone());
        sym_sources.push(SymSlotSource::Palindromic(i));
    }
    for (i, (_, b)) in delta.general_slots.iter().enumerate() {
        sym_slots.push(b + b.transpose());
        sym_sources.push(SymSlotSource::SymmetricPart(i));
        let d2 = b - b.transpose();
        if d2.iter().any(|v| *v != 0.0) {
            skew_slots.push(d2);
            skew_sources.push(i);
        }
    }
    let pencil = AffinePencil::new(delta.a0.clone(), delta.coeffs.clone(), sym_slots, skew_slots)?;
    Ok(SymmetrizedPencil { pencil, sym_sources, skew_sources })
}

/// A monic pencil `L''(x, w) = M L(x + x̂, w + ŵ) M` with `M = L(x̂, ŵ)^{-1/2}`.
#[derive(Debug, Clone)]
pub struct MonicNormalization {
    pub pencil: AffinePencil,
    pub x_shift: Vec<f64>,
    pub w_shift: Vec<f64>,
    pub congruence: Mat,
}

impl MonicNormalization {
    /// `X ↦ X − x̂ I`, mapping `proj D_L` onto `proj D_{L''}`.
    pub fn to_normalized(&self, x: &MatrixTuple) -> Result<MatrixTuple> {
        if x.g() != self.x_shift.len() {
            return Err(Error::Shape("point has the wrong number of variables".into()));
        }
        let n = x.n();
        MatrixTuple::new(x.mats().iter().zip(&self.x_shift).map(|(m, s)| m - Mat::identity(n, n) * *s).collect())
    }
}

/// Translates a pencil by a strictly feasible scalar point and congruences
/// the constant term to `I`. Skew slots are translated by zero.
pub fn monic_normalize(l: &AffinePencil, x_hat: &[f64], w_hat: &[f64]) -> Result<MonicNormalization> {
    if x_hat.len() != l.g() || w_hat.len() != l.sym_slots.len() {
        return Err(Error::Shape("strict point does not match the pencil slots".into()));
    }
    let mut a0 = l.a0.clone();
    for (a, s) in l.coeffs.iter().zip(x_hat) {
        a0 += a * *s;
    }
    for (a, s) in l.sym_slots.iter().zip(w_hat) {
        a0 += a * *s;
    }
    let a0 = symmetrize(&a0);
    let lam = min_eig(&a0)?;
    if lam < 1e-6 {
        return Err(Error::NotStrictlyFeasible(lam));
    }
    let m = inv_sqrt(&a0)?;
    let conj = |a: &Mat| symmetrize(&(&m * a * &m));
    let pencil = AffinePencil {
        a0: Mat::identity(l.size(), l.size()),
        coeffs: l.coeffs.iter().map(conj).collect(),
        sym_slots: l.sym_slots.iter().map(conj).collect(),
        skew_slots: l.skew_slots.iter().map(|d| &m * d * &m).collect(),
    };
    Ok(MonicNormalization { pencil, x_shift: x_hat.to_vec(), w_shift: w_hat.to_vec(), congruence: m })
}
