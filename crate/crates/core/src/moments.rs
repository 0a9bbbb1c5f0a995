//! Matrix moment sequences, free Hankel and localizing matrices, Riesz maps.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matops::{is_symmetric, kron, spectral_norm, BlockMatrix, Mat};
use crate::ncpoly::{enumerate_words, MatrixPoly, MatrixTuple, Word};

/// Symmetric, normalized sequence `(Y_α)_{|α| <= max_deg}` of `n×n` matrices.
///
/// One matrix is stored per class `{α, α*}` (keyed by the graded-lex smaller
/// word); the other member is read back as the transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSequence {
    g: usize,
    n: usize,
    max_deg: usize,
    values: HashMap<Word, Mat>,
}

impl MomentSequence {
    /// Build from a function of class representatives. `Y_∅` is forced to `I`
    /// and palindromic values are symmetrized.
    pub fn from_fn(g: usize, n: usize, max_deg: usize, mut f: impl FnMut(&Word) -> Mat) -> Self {
        let mut values = HashMap::new();
        for w in enumerate_words(g, max_deg) {
            let (rep, flipped) = w.class_rep();
            if flipped {
                continue;
            }
            let v = if rep.is_empty() {
                Mat::identity(n, n)
            } else if rep.is_palindrome() {
                crate::matops::symmetrize(&f(&rep))
            } else {
                f(&rep)
            };
            values.insert(rep, v);
        }
        MomentSequence { g, n, max_deg, values }
    }

    /// Validating constructor from representative values. Missing classes are
    /// an error; if both members of a class are given they must agree.
    pub fn from_values(
        g: usize,
        n: usize,
        max_deg: usize,
        given: impl IntoIterator<Item = (Word, Mat)>,
    ) -> Result<Self> {
        let mut values: HashMap<Word, Mat> = HashMap::new();
        for (w, m) in given {
            if w.len() > max_deg || w.max_letter() > g {
                return Err(Error::InvalidMoments(format!("word {w} outside (g={g}, max_deg={max_deg})")));
            }
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::InvalidMoments(format!("Y_{w} is not {n}x{n}")));
            }
            let (rep, flipped) = w.class_rep();
            let m = if flipped { m.transpose() } else { m };
            if let Some(prev) = values.get(&rep) {
                if (prev - &m).amax() > 1e-10 * (1.0 + m.amax()) {
                    return Err(Error::InvalidMoments(format!("Y_{w} inconsistent with Y_{}ᵀ", w.star())));
                }
            }
            values.insert(rep, m);
        }
        for w in enumerate_words(g, max_deg) {
            let (rep, _) = w.class_rep();
            let v = values.get(&rep).ok_or_else(|| Error::InvalidMoments(format!("missing moment for word {rep}")))?;
            if rep.is_empty() && (v - Mat::identity(n, n)).amax() > 1e-12 {
                return Err(Error::InvalidMoments("Y_∅ must be the identity".into()));
            }
            if rep.is_palindrome() && !is_symmetric(v, 1e-10) {
                return Err(Error::InvalidMoments(format!("Y_{rep} must be symmetric")));
            }
        }
        Ok(MomentSequence { g, n, max_deg, values })
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_deg(&self) -> usize {
        self.max_deg
    }

    /// `Y_w`, transposing the stored class representative when needed.
    pub fn get(&self, w: &Word) -> Mat {
        let (rep, flipped) = w.class_rep();
        let v = self.values.get(&rep).unwrap_or_else(|| panic!("moment Y_{w} beyond degree {}", self.max_deg));
        if flipped {
            v.transpose()
        } else {
            v.clone()
        }
    }

    pub fn try_get(&self, w: &Word) -> Result<Mat> {
        if w.len() > self.max_deg {
            return Err(Error::InsufficientDegree { have: self.max_deg, need: w.len() });
        }
        Ok(self.get(w))
    }

    /// Class representatives in graded-lex order.
    pub fn representatives(&self) -> Vec<Word> {
        let mut v: Vec<Word> = self.values.keys().cloned().collect();
        v.sort();
        v
    }

    /// `Ŷ = (Y_{x_1}, …, Y_{x_g})`.
    pub fn first_moments(&self) -> Result<MatrixTuple> {
        MatrixTuple::new((1..=self.g).map(|j| self.get(&Word::letter(j))).collect())
    }

    pub fn truncate(&self, max_deg: usize) -> Result<Self> {
        if max_deg > self.max_deg {
            return Err(Error::InsufficientDegree { have: self.max_deg, need: max_deg });
        }
        Ok(Self::from_fn(self.g, self.n, max_deg, |w| self.get(w)))
    }

    /// Applies `Y_α ↦ Vᵀ Y_α V` to every moment (compression by an isometry).
    pub fn compress(&self, v: &Isometry) -> Result<Self> {
        if v.rows() != self.n {
            return Err(Error::Shape(format!("isometry has {} rows, moments are {}x{}", v.rows(), self.n, self.n)));
        }
        let m = v.matrix();
        Ok(Self::from_fn(self.g, v.cols(), self.max_deg, |w| m.transpose() * self.get(w) * m))
    }

    /// Blockwise direct sum `Y_α ⊕ Y'_α`.
    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        if self.g != other.g {
            return Err(Error::Shape("direct sum of sequences in different variable counts".into()));
        }
        let deg = self.max_deg.min(other.max_deg);
        Ok(Self::from_fn(self.g, self.n + other.n, deg, |w| crate::matops::block_diag(&[self.get(w), other.get(w)])))
    }

    pub fn to_file(&self) -> MomentFile {
        let values = self
            .representatives()
            .into_iter()
            .map(|w| {
                let m = self.get(&w);
                (w.key(), rows_of(&m))
            })
            .collect();
        MomentFile { g: self.g, n: self.n, max_deg: self.max_deg, values }
    }

    pub fn from_file(f: &MomentFile) -> Result<Self> {
        let mut given = Vec::with_capacity(f.values.len());
        for (k, rows) in &f.values {
            given.push((Word::from_key(k)?, mat_from_rows(rows)?));
        }
        Self::from_values(f.g, f.n, f.max_deg, given)
    }
}

/// On-disk moment sequence; only class representatives are required.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MomentFile {
    pub g: usize,
    pub n: usize,
    pub max_deg: usize,
    pub values: BTreeMap<String, Vec<Vec<f64>>>,
}

pub(crate) fn rows_of(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub(crate) fn mat_from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let r = rows.len();
    let c = rows.first().map(|x| x.len()).unwrap_or(0);
    if rows.iter().any(|x| x.len() != c) {
        return Err(Error::Shape("ragged matrix rows".into()));
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

/// Real matrix `V` (`m×n`, `m >= n`) with `VᵀV = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Isometry(Mat);

impl Isometry {
    pub fn new(v: Mat) -> Result<Self> {
        if v.nrows() < v.ncols() {
            return Err(Error::Shape(format!("isometry must be tall, got {}x{}", v.nrows(), v.ncols())));
        }
        let err = (v.transpose() * &v - Mat::identity(v.ncols(), v.ncols())).amax();
        if err > 1e-10 {
            return Err(Error::NotIsometry(err));
        }
        Ok(Isometry(v))
    }

    pub fn identity(n: usize) -> Self {
        Isometry(Mat::identity(n, n))
    }

    /// Orthonormalize the columns of `a` (modified Gram–Schmidt).
    pub fn orthonormalize(a: &Mat) -> Result<Self> {
        let mut q = a.clone();
        for j in 0..q.ncols() {
            for k in 0..j {
                let proj = q.column(k).dot(&q.column(j));
                let ck = q.column(k).into_owned();
                q.column_mut(j).axpy(-proj, &ck, 1.0);
            }
            let nrm = q.column(j).norm();
            if nrm < 1e-12 {
                return Err(Error::Invalid("columns are linearly dependent".into()));
            }
            q.column_mut(j).scale_mut(1.0 / nrm);
        }
        Isometry::new(q)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &Mat {
        &self.0
    }
}

/// `Y_α = Vᵀ Z^α V` for all `|α| <= max_deg`.
pub fn moments_from_representation(z: &MatrixTuple, v: &Isometry, max_deg: usize) -> Result<MomentSequence> {
    if v.rows() != z.n() {
        return Err(Error::Shape(format!("isometry maps into R^{}, tuple acts on R^{}", v.rows(), z.n())));
    }
    // Z^α V for every word, built by prepending letters
    let mut images: HashMap<Word, Mat> = HashMap::new();
    images.insert(Word::empty(), v.matrix().clone());
    for w in enumerate_words(z.g(), max_deg).into_iter().skip(1) {
        let mut letters = w.letters();
        let first = letters.next().unwrap();
        let rest = Word::new(letters);
        let img = z.get(first - 1) * &images[&rest];
        images.insert(w, img);
    }
    let vt = v.matrix().transpose();
    Ok(MomentSequence::from_fn(z.g(), v.cols(), max_deg, |w| &vt * &images[w]))
}

fn word_label(w: &Word) -> String {
    if w.is_empty() {
        "∅".to_string()
    } else {
        w.key()
    }
}

/// Truncated free Hankel matrix `H_d(W) = (W_{α*β})_{|α|,|β| <= d}`.
pub fn build_hankel(w: &MomentSequence, d: usize) -> Result<BlockMatrix> {
    if 2 * d > w.max_deg() {
        return Err(Error::InsufficientDegree { have: w.max_deg(), need: 2 * d });
    }
    let words = enumerate_words(w.g(), d);
    let labels: Vec<String> = words.iter().map(word_label).collect();
    let dims = vec![w.n(); words.len()];
    let mut out = BlockMatrix::new(labels.clone(), labels, dims.clone(), dims);
    for (i, a) in words.iter().enumerate() {
        for (j, b) in words.iter().enumerate() {
            out.set_block(i, j, w.get(&a.sandwich(&Word::empty(), b)))?;
        }
    }
    Ok(out)
}

/// Truncated `p`-localizing matrix with blocks `Σ_γ p_γ ⊗ W_{α*γβ}`.
///
/// Each block is `ℓn×ℓn` with the coefficient index outer and the moment
/// index inner, i.e. the flattening of `kron(p_γ, W)`.
pub fn build_localizing(p: &MatrixPoly, w: &MomentSequence, d: usize) -> Result<BlockMatrix> {
    if p.g() != w.g() {
        return Err(Error::Shape("polynomial and moments use different variable counts".into()));
    }
    let need = 2 * d + p.degree();
    if need > w.max_deg() {
        return Err(Error::InsufficientDegree { have: w.max_deg(), need });
    }
    let words = enumerate_words(w.g(), d);
    let labels: Vec<String> = words.iter().map(word_label).collect();
    let bd = p.dim() * w.n();
    let dims = vec![bd; words.len()];
    let mut out = BlockMatrix::new(labels.clone(), labels, dims.clone(), dims);
    for (i, a) in words.iter().enumerate() {
        for (j, b) in words.iter().enumerate() {
            let mut block = Mat::zeros(bd, bd);
            for (gamma, coeff) in p.terms() {
                block += kron(coeff, &w.get(&a.sandwich(gamma, b)));
            }
            out.set_block(i, j, block)?;
        }
    }
    Ok(out)
}

/// Riesz map `Φ_W(Σ B_α α) = Σ B_α ⊗ W_α`.
pub fn riesz_apply(w: &MomentSequence, p: &MatrixPoly) -> Result<Mat> {
    if p.degree() > w.max_deg() {
        return Err(Error::InsufficientDegree { have: w.max_deg(), need: p.degree() });
    }
    if p.g() != w.g() {
        return Err(Error::Shape("polynomial and moments use different variable counts".into()));
    }
    let s = p.dim() * w.n();
    let mut out = Mat::zeros(s, s);
    for (alpha, b) in p.terms() {
        out += kron(b, &w.get(alpha));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthViolation {
    pub word: String,
    pub norm: f64,
    pub bound: f64,
}

/// Words `α` with `|α| <= max_len` and `‖W_α‖₂ > C^{|α|}(1 + 1e-6)`.
pub fn growth_bound_check(w: &MomentSequence, c: f64, max_len: usize) -> Vec<GrowthViolation> {
    let mut out = Vec::new();
    for rep in w.representatives() {
        if rep.len() > max_len {
            continue;
        }
        let norm = spectral_norm(&w.get(&rep));
        let bound = c.powi(rep.len() as i32);
        if norm > bound * (1.0 + 1e-6) {
            out.push(GrowthViolation { word: rep.key(), norm, bound });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matops::min_eig;
    use crate::ncpoly::parse_poly;

    fn scalar_moments(point: &[f64], deg: usize) -> MomentSequence {
        let z = MatrixTuple::scalar(point);
        moments_from_representation(&z, &Isometry::identity(1), deg).unwrap()
    }

    #[test]
    fn scalar_representation_gives_classical_moments() {
        let y = scalar_moments(&[0.6, 0.5], 4);
        let w = Word::from_key("1221").unwrap();
        assert!((y.get(&w)[(0, 0)] - 0.36 * 0.25).abs() < 1e-15);
        assert_eq!(y.get(&Word::empty())[(0, 0)], 1.0);
    }

    #[test]
    fn first_moments_are_the_tuple() {
        let z = MatrixTuple::new(vec![
            Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 0.0]),
            Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 3.0]),
        ])
        .unwrap();
        let y = moments_from_representation(&z, &Isometry::identity(2), 2).unwrap();
        assert_eq!(y.first_moments().unwrap(), z);
        let w12 = Word::from_key("12").unwrap();
        assert_eq!(y.get(&w12), z.get(0) * z.get(1));
        assert_eq!(y.get(&w12.star()), z.get(1) * z.get(0));
    }

    #[test]
    fn cross_term_witness_from_direct_sum() {
        // (2X ⊕ 0, 0 ⊕ 2Y) compressed by (I/√2; I/√2) returns (X, Y)
        let x = Mat::from_row_slice(2, 2, &[0.3, 1.5, 1.5, -2.0]);
        let yv = Mat::from_row_slice(2, 2, &[1.0, -0.7, -0.7, 0.2]);
        let zero = Mat::zeros(2, 2);
        let z = MatrixTuple::new(vec![
            crate::matops::block_diag(&[&x * 2.0, zero.clone()]),
            crate::matops::block_diag(&[zero, &yv * 2.0]),
        ])
        .unwrap();
        let s = 0.5f64.sqrt();
        let mut v = Mat::zeros(4, 2);
        for i in 0..2 {
            v[(i, i)] = s;
            v[(i + 2, i)] = s;
        }
        let y = moments_from_representation(&z, &Isometry::new(v).unwrap(), 4).unwrap();
        assert!((y.get(&Word::letter(1)) - &x).amax() < 1e-14);
        assert!((y.get(&Word::letter(2)) - &yv).amax() < 1e-14);
        let p = parse_poly("1 - x1*x2^2*x1", 2).unwrap();
        // p(Z) = I since Z1 Z2 = 0
        let pz = crate::ncpoly::eval_poly(&p, &z).unwrap();
        assert!((pz - Mat::identity(4, 4)).amax() < 1e-14);
        let loc = build_localizing(&p, &y, 0).unwrap().flatten();
        assert!(min_eig(&loc).unwrap() > -1e-12);
        let h = build_hankel(&y, 2).unwrap().flatten();
        assert!(min_eig(&h).unwrap() > -1e-9);
    }

    #[test]
    fn hankel_layout_matches_display() {
        let y = scalar_moments(&[0.6, 0.5], 4);
        let h = build_hankel(&y, 2).unwrap();
        assert_eq!(h.row_labels, vec!["∅", "1", "2", "11", "12", "21", "22"]);
        let f = h.flatten();
        assert_eq!(f.nrows(), 7);
        let words = enumerate_words(2, 2);
        for (i, a) in words.iter().enumerate() {
            for (j, b) in words.iter().enumerate() {
                let w = a.star().concat(b);
                let ones = w.letters().filter(|&l| l == 1).count() as i32;
                let twos = w.len() as i32 - ones;
                let expected = 0.6f64.powi(ones) * 0.5f64.powi(twos);
                assert!((f[(i, j)] - expected).abs() < 1e-15);
            }
        }
        assert_eq!(build_hankel(&y, 0).unwrap().flatten(), Mat::identity(1, 1));
        assert!(matches!(build_hankel(&y, 3), Err(Error::InsufficientDegree { .. })));
    }

    fn symbolic(g: usize, deg: usize) -> MomentSequence {
        // scalar moments with distinct values per class so that layouts can be read back
        let reps: Vec<Word> = enumerate_words(g, deg).into_iter().filter(|w| !w.class_rep().1).collect();
        MomentSequence::from_fn(g, 1, deg, |w| {
            let k = reps.iter().position(|r| r == w).unwrap();
            Mat::from_element(1, 1, 1000.0 + k as f64)
        })
    }

    #[test]
    fn localizing_tv_entries() {
        let p = parse_poly("1 - x1^2 - x2^4", 2).unwrap();
        let y = symbolic(2, 6);
        let v = |s: &str| y.get(&Word::from_key(s).unwrap())[(0, 0)];
        let l0 = build_localizing(&p, &y, 0).unwrap().flatten();
        assert_eq!(l0[(0, 0)], 1.0 - v("11") - v("2222"));
        let l1 = build_localizing(&p, &y, 1).unwrap().flatten();
        assert_eq!(l1.nrows(), 3);
        assert_eq!(l1[(0, 0)], 1.0 - v("11") - v("2222"));
        assert_eq!(l1[(1, 2)], v("12") - v("1112") - v("122222"));
        assert_eq!(l1[(0, 1)], v("1") - v("111") - v("22221"));
        assert_eq!(l1[(2, 2)], v("22") - v("2112") - v("222222"));
        assert!(matches!(build_localizing(&p, &y, 2), Err(Error::InsufficientDegree { .. })));
    }

    #[test]
    fn localizing_of_one_is_hankel() {
        let y = symbolic(2, 4);
        let one = MatrixPoly::constant(2, 1, 1.0);
        for d in 0..=2 {
            assert_eq!(build_localizing(&one, &y, d).unwrap().flatten(), build_hankel(&y, d).unwrap().flatten());
        }
    }

    #[test]
    fn riesz_examples() {
        let y = symbolic(2, 3);
        let one = MatrixPoly::constant(2, 1, 1.0);
        assert_eq!(riesz_apply(&y, &one).unwrap(), Mat::identity(1, 1));
        let p = parse_poly("x1^2 - x1*x2 + 3", 2).unwrap();
        let a = riesz_apply(&y, &p).unwrap();
        let b = riesz_apply(&y, &p.star()).unwrap();
        assert_eq!(a.transpose(), b);
        let big = parse_poly("x1^4", 2).unwrap();
        assert!(riesz_apply(&y, &big).is_err());
    }

    #[test]
    fn growth_examples() {
        let y = scalar_moments(&[0.6, 0.5], 6);
        assert!(growth_bound_check(&y, 1.25f64.sqrt(), 6).is_empty());
        assert!(growth_bound_check(&symbolic(2, 4), 1e6, 4).is_empty());
        assert!(!growth_bound_check(&symbolic(2, 4), 1.0, 4).is_empty());
    }

    #[test]
    fn moment_file_roundtrip_and_validation() {
        let z = MatrixTuple::new(vec![
            Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 0.0]),
            Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 3.0]),
        ])
        .unwrap();
        let y = moments_from_representation(&z, &Isometry::identity(2), 3).unwrap();
        let file = y.to_file();
        let text = serde_json::to_string(&file).unwrap();
        let back = MomentSequence::from_file(&serde_json::from_str(&text).unwrap()).unwrap();
        for w in enumerate_words(2, 3) {
            assert_eq!(back.get(&w), y.get(&w));
        }
        let mut missing = file.clone();
        missing.values.remove("12");
        assert!(matches!(MomentSequence::from_file(&missing), Err(Error::InvalidMoments(_))));
        let mut bad_id = file.clone();
        bad_id.values.insert(String::new(), vec![vec![2.0, 0.0], vec![0.0, 1.0]]);
        assert!(MomentSequence::from_file(&bad_id).is_err());
    }

    #[test]
    fn isometry_validation() {
        assert!(Isometry::new(Mat::from_row_slice(2, 1, &[1.0, 1.0])).is_err());
        assert!(Isometry::new(Mat::from_row_slice(1, 2, &[1.0, 0.0])).is_err());
        let q = Isometry::orthonormalize(&Mat::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 2.0])).unwrap();
        assert_eq!(q.cols(), 2);
    }
}
