//! Finite-dimensional representing tuples from flat truncated moment sequences.
//!
//! `H_d(Y)` is factored as a Gram matrix of vectors `φ(β, k)`; the shift
//! `φ(β, k) ↦ φ(x_j β, k)` on words of length `<= d−1` defines `Z_j`, and the
//! vectors `φ(∅, k)` form `Q`. Then `Y_α = Qᵀ Z^α Q`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{ser_mat, ser_mats};
use crate::matops::{asymmetry, inv_sqrt, min_eig, sym_eig, symmetrize, Mat};
use crate::moments::{build_hankel, build_localizing, MomentSequence};
use crate::ncpoly::{enumerate_words, eval_poly, eval_word, MatrixPoly, MatrixTuple, Word};

pub const DEFAULT_RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct GnsResult {
    #[serde(serialize_with = "ser_mats", rename = "z")]
    z_mats: Vec<Mat>,
    #[serde(skip)]
    pub z: MatrixTuple,
    /// `r×n` with orthonormal columns.
    #[serde(serialize_with = "ser_mat")]
    pub q: Mat,
    /// `rank H_k(Y)` for `k = 0..=d`.
    pub rank_profile: Vec<usize>,
    /// `max_{|α| <= 2(d−1)} max|Qᵀ Z^α Q − Y_α|`.
    pub moment_residual: f64,
    /// Largest `|Z_j − Z_jᵀ|` entry before symmetrization.
    pub symmetry_defect: f64,
    /// `λmin H↑_{p, d−⌈deg p/2⌉}(Y)` when `p` is given and the level exists.
    pub localizing_min_eig: Option<f64>,
    /// `λmin p(Z)` when `p` is given.
    pub p_min_eig: Option<f64>,
}

impl GnsResult {
    pub fn dim(&self) -> usize {
        self.q.nrows()
    }
}

fn numerical_rank(values: &[f64], rank_tol: f64) -> usize {
    let top = values.iter().copied().fold(0.0f64, f64::max);
    if top <= 0.0 {
        return 0;
    }
    values.iter().filter(|&&v| v > rank_tol * top).count()
}

/// Reconstructs `(Z, Q)` from `Y` at level `d >= 1`.
pub fn reconstruct(y: &MomentSequence, d: usize, rank_tol: f64, p: Option<&MatrixPoly>) -> Result<GnsResult> {
    if d == 0 {
        return Err(Error::Invalid("GNS reconstruction needs d >= 1".into()));
    }
    let n = y.n();
    let g = y.g();
    let hd = build_hankel(y, d)?.flatten();
    let e = sym_eig(&hd)?;
    let lmax = e.max().max(0.0);
    if e.min() < -1e-9 * lmax.max(1.0) {
        return Err(Error::NotPsd(e.min()));
    }
    let mut rank_profile = Vec::with_capacity(d + 1);
    for k in 0..d {
        let hk = build_hankel(y, k)?.flatten();
        rank_profile.push(numerical_rank(&sym_eig(&hk)?.values, rank_tol));
    }
    let r = numerical_rank(&e.values, rank_tol);
    rank_profile.push(r);
    if r != rank_profile[d - 1] {
        return Err(Error::NotFlat { low: rank_profile[d - 1], high: r });
    }

    // Φ = diag(√λ) Vᵀ over the retained eigenpairs: columns are φ(β, k).
    let keep: Vec<usize> = (0..e.values.len()).filter(|&i| e.values[i] > rank_tol * lmax).collect();
    let cols = hd.ncols();
    let mut phi = Mat::zeros(r, cols);
    for (row, &i) in keep.iter().enumerate() {
        let s = e.values[i].sqrt();
        for c in 0..cols {
            phi[(row, c)] = s * e.vectors[(c, i)];
        }
    }
    let words = enumerate_words(g, d);
    let index: std::collections::HashMap<Word, usize> =
        words.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
    let low: Vec<&Word> = words.iter().filter(|w| w.len() < d).collect();
    let col_of = |w: &Word, k: usize| index[w] * n + k;

    let mut phi_low = Mat::zeros(r, low.len() * n);
    for (bi, b) in low.iter().enumerate() {
        for k in 0..n {
            phi_low.set_column(bi * n + k, &phi.column(col_of(b, k)));
        }
    }
    // Φ_low⁺ = Φ_lowᵀ (Φ_low Φ_lowᵀ)⁺ with the same relative tolerance.
    let gram = symmetrize(&(&phi_low * phi_low.transpose()));
    let ge = sym_eig(&gram)?;
    let gtop = ge.max();
    let gram_pinv = ge.map(|v| if v > rank_tol * gtop { 1.0 / v } else { 0.0 });
    let right = phi_low.transpose() * gram_pinv;

    let mut z_mats = Vec::with_capacity(g);
    let mut symmetry_defect = 0.0f64;
    for j in 1..=g {
        let mut shifted = Mat::zeros(r, low.len() * n);
        for (bi, b) in low.iter().enumerate() {
            let xb = Word::letter(j).concat(b);
            for k in 0..n {
                shifted.set_column(bi * n + k, &phi.column(col_of(&xb, k)));
            }
        }
        let zj = &shifted * &right;
        symmetry_defect = symmetry_defect.max(asymmetry(&zj));
        z_mats.push(symmetrize(&zj));
    }
    let mut q = Mat::zeros(r, n);
    for k in 0..n {
        q.set_column(k, &phi.column(col_of(&Word::empty(), k)));
    }
    // Polar correction removes the truncation error in QᵀQ = Y_∅ = I.
    let q = &q * inv_sqrt(&symmetrize(&(q.transpose() * &q)))?;
    let z = MatrixTuple::new(z_mats.clone())?;

    let mut moment_residual = 0.0f64;
    for w in enumerate_words(g, 2 * (d - 1)) {
        let (rep, flipped) = w.class_rep();
        if flipped {
            continue;
        }
        let m = q.transpose() * eval_word(&rep, &z)? * &q;
        moment_residual = moment_residual.max((m - y.get(&rep)).amax());
    }

    let (localizing_min_eig, p_min_eig) = match p {
        Some(p) => {
            let half = p.degree().div_ceil(2);
            let loc = if d >= half && 2 * (d - half) + p.degree() <= y.max_deg() {
                Some(min_eig(&build_localizing(p, y, d - half)?.flatten())?)
            } else {
                None
            };
            (loc, Some(min_eig(&symmetrize(&eval_poly(p, &z)?))?))
        }
        None => (None, None),
    };

    Ok(GnsResult { z_mats, z, q, rank_profile, moment_residual, symmetry_defect, localizing_min_eig, p_min_eig })
}
