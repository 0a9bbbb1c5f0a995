//! Words in noncommuting symmetric letters, free matrix polynomials and their
//! evaluation on tuples of symmetric matrices.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::matops::{is_symmetric, kron, max_abs, Mat};

/// A word `x_{i1} x_{i2} ... x_{ik}` stored as its 1-based letter indices.
///
/// Ordering is graded lexicographic: shorter words first, then lexicographic
/// in the letters.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letter(j: usize) -> Self {
        Word(vec![j as u8])
    }

    pub fn new(letters: impl IntoIterator<Item = usize>) -> Self {
        Word(letters.into_iter().map(|l| l as u8).collect())
    }

    pub fn letters(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&l| l as usize)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The involution: letter order reversed.
    pub fn star(&self) -> Word {
        let mut v = self.0.clone();
        v.reverse();
        Word(v)
    }

    pub fn is_palindrome(&self) -> bool {
        self.0.iter().eq(self.0.iter().rev())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// `self* · middle · right`, the index pattern of Hankel-type entries.
    pub fn sandwich(&self, middle: &Word, right: &Word) -> Word {
        let mut v = Vec::with_capacity(self.len() + middle.len() + right.len());
        v.extend(self.0.iter().rev());
        v.extend_from_slice(&middle.0);
        v.extend_from_slice(&right.0);
        Word(v)
    }

    /// Canonical representative of the class `{w, w*}` (the smaller one) and
    /// whether `self` is the transposed member.
    pub fn class_rep(&self) -> (Word, bool) {
        let s = self.star();
        if s < *self {
            (s, true)
        } else {
            (self.clone(), false)
        }
    }

    pub fn max_letter(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0) as usize
    }

    /// Key used in JSON files: letters as digits (dot separated when `g > 9`),
    /// the empty string for the empty word.
    pub fn key(&self) -> String {
        if self.0.iter().all(|&l| l <= 9) {
            self.0.iter().map(|l| char::from(b'0' + l)).collect()
        } else {
            self.0.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(".")
        }
    }

    pub fn from_key(key: &str) -> Result<Word> {
        let key = key.trim();
        if key.is_empty() {
            return Ok(Word::empty());
        }
        let parse_err = || Error::Parse { pos: 0, msg: format!("bad word key `{key}`") };
        if key.contains('.') {
            key.split('.').map(|s| s.parse::<u8>().map_err(|_| parse_err())).collect::<Result<Vec<_>>>().map(Word)
        } else {
            key.chars()
                .map(|c| c.to_digit(10).map(|d| d as u8).ok_or_else(parse_err))
                .collect::<Result<Vec<_>>>()
                .map(Word)
        }
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            write!(f, "∅")
        } else {
            write!(f, "{}", self.key())
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// All words of length `<= max_deg` in `g` letters, graded lexicographic.
pub fn enumerate_words(g: usize, max_deg: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    let mut layer = vec![Word::empty()];
    for _ in 0..max_deg {
        let mut next = Vec::with_capacity(layer.len() * g);
        for w in &layer {
            for j in 1..=g {
                let mut v = w.0.clone();
                v.push(j as u8);
                next.push(Word(v));
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Words of length exactly `deg`.
pub fn words_of_degree(g: usize, deg: usize) -> Vec<Word> {
    enumerate_words(g, deg).into_iter().filter(|w| w.len() == deg).collect()
}

/// A g-tuple of symmetric `n×n` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixTuple {
    n: usize,
    mats: Vec<Mat>,
}

impl MatrixTuple {
    pub fn new(mats: Vec<Mat>) -> Result<Self> {
        let n = mats
            .first()
            .map(|m| m.nrows())
            .ok_or_else(|| Error::Invalid("a matrix tuple needs at least one entry".into()))?;
        for m in &mats {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Shape(format!(
                    "tuple entries must all be {n}x{n}, got {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if !is_symmetric(m, 1e-12) {
                return Err(Error::NotSymmetric(crate::matops::asymmetry(m)));
            }
        }
        Ok(MatrixTuple { n, mats })
    }

    /// Scalar point, i.e. a tuple of 1×1 matrices.
    pub fn scalar(values: &[f64]) -> Self {
        MatrixTuple { n: 1, mats: values.iter().map(|&v| Mat::from_element(1, 1, v)).collect() }
    }

    pub fn zeros(g: usize, n: usize) -> Self {
        MatrixTuple { n, mats: vec![Mat::zeros(n, n); g] }
    }

    pub fn g(&self) -> usize {
        self.mats.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, j: usize) -> &Mat {
        &self.mats[j]
    }

    pub fn mats(&self) -> &[Mat] {
        &self.mats
    }

    pub fn into_mats(self) -> Vec<Mat> {
        self.mats
    }

    pub fn max_norm(&self) -> f64 {
        self.mats.iter().map(crate::matops::spectral_norm).fold(0.0, f64::max)
    }
}

/// Ordered product `X_{i1} ⋯ X_{ik}`; the empty word maps to the identity.
pub fn eval_word(w: &Word, x: &MatrixTuple) -> Result<Mat> {
    if w.max_letter() > x.g() {
        return Err(Error::UnknownVariable { index: w.max_letter(), g: x.g() });
    }
    let mut acc = Mat::identity(x.n(), x.n());
    for j in w.letters() {
        acc *= x.get(j - 1);
    }
    Ok(acc)
}

/// Free polynomial with `ℓ×ℓ` real matrix coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPoly {
    g: usize,
    dim: usize,
    terms: BTreeMap<Word, Mat>,
}

impl MatrixPoly {
    pub fn zero(g: usize, dim: usize) -> Self {
        MatrixPoly { g, dim, terms: BTreeMap::new() }
    }

    /// `c · I_ℓ` as a constant polynomial.
    pub fn constant(g: usize, dim: usize, c: f64) -> Self {
        let mut p = Self::zero(g, dim);
        p.add_term(Word::empty(), Mat::identity(dim, dim) * c);
        p
    }

    /// The scalar monomial `c · w`.
    pub fn monomial(g: usize, w: Word, c: f64) -> Self {
        let mut p = Self::zero(g, 1);
        p.add_term(w, Mat::from_element(1, 1, c));
        p
    }

    pub fn var(g: usize, j: usize) -> Self {
        Self::monomial(g, Word::letter(j), 1.0)
    }

    pub fn from_terms(g: usize, dim: usize, terms: impl IntoIterator<Item = (Word, Mat)>) -> Result<Self> {
        let mut p = Self::zero(g, dim);
        for (w, c) in terms {
            if w.max_letter() > g {
                return Err(Error::UnknownVariable { index: w.max_letter(), g });
            }
            if c.nrows() != dim || c.ncols() != dim {
                return Err(Error::Shape(format!("coefficient must be {dim}x{dim}")));
            }
            p.add_term(w, c);
        }
        Ok(p)
    }

    /// Direct sum `p_1 ⊕ ⋯ ⊕ p_k` of scalar polynomials.
    pub fn diag(parts: &[MatrixPoly]) -> Result<Self> {
        let g = parts.first().map(|p| p.g).unwrap_or(1);
        let dim: usize = parts.iter().map(|p| p.dim).sum();
        let mut out = Self::zero(g, dim);
        let mut offset = 0;
        for p in parts {
            if p.g != g {
                return Err(Error::Shape("diag parts use different variable counts".into()));
            }
            for (w, c) in &p.terms {
                let mut block = Mat::zeros(dim, dim);
                block.view_mut((offset, offset), (p.dim, p.dim)).copy_from(c);
                out.add_term(w.clone(), block);
            }
            offset += p.dim;
        }
        Ok(out)
    }

    fn add_term(&mut self, w: Word, c: Mat) {
        use std::collections::btree_map::Entry;
        match self.terms.entry(w) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().iter().all(|v| *v == 0.0) {
                    e.remove();
                }
            }
            Entry::Vacant(e) => {
                if c.iter().any(|v| *v != 0.0) {
                    e.insert(c);
                }
            }
        }
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &Mat)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, w: &Word) -> Mat {
        self.terms.get(w).cloned().unwrap_or_else(|| Mat::zeros(self.dim, self.dim))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Word::len).max().unwrap_or(0)
    }

    /// `coefficient(w*) == coefficient(w)^T` for every word, exactly.
    pub fn is_symmetric(&self) -> bool {
        self.terms.iter().all(|(w, c)| {
            let s = self.coefficient(&w.star());
            s == c.transpose()
        })
    }

    /// `max_w |B_{w*} − B_wᵀ|`.
    pub fn asymmetry(&self) -> f64 {
        self.terms.iter().map(|(w, c)| (self.coefficient(&w.star()) - c.transpose()).amax()).fold(0.0, f64::max)
    }

    /// Symmetric up to rounding: asymmetry at most `1e-12 (1 + max coefficient)`.
    pub fn is_numerically_symmetric(&self) -> bool {
        self.asymmetry() <= 1e-12 * (1.0 + self.max_coeff())
    }

    /// `(P + P*)/2`.
    pub fn symmetric_part(&self) -> Self {
        (self + &self.star()).scale(0.5)
    }

    /// The involution `P* = Σ B_wᵀ w*`.
    pub fn star(&self) -> Self {
        let mut out = Self::zero(self.g, self.dim);
        for (w, c) in &self.terms {
            out.add_term(w.star(), c.transpose());
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero(self.g, self.dim);
        for (w, c) in &self.terms {
            out.add_term(w.clone(), c * s);
        }
        out
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.g != other.g || self.dim != other.dim {
            return Err(Error::Shape(format!(
                "incompatible polynomials: (g={}, ℓ={}) vs (g={}, ℓ={})",
                self.g, self.dim, other.g, other.dim
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.try_add(&other.scale(-1.0))
    }

    /// Noncommutative product: `(Σ A_u u)(Σ B_v v) = Σ A_u B_v · uv`.
    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = Self::zero(self.g, self.dim);
        for (u, a) in &self.terms {
            for (v, b) in &other.terms {
                out.add_term(u.concat(v), a * b);
            }
        }
        Ok(out)
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::constant(self.g, self.dim, 1.0);
        for _ in 0..k {
            out = out.try_mul(self).expect("same shape");
        }
        out
    }

    /// `c ⊗ I_ℓ` promotion of a scalar polynomial.
    pub fn promote(&self, dim: usize) -> Result<Self> {
        if self.dim == dim {
            return Ok(self.clone());
        }
        if self.dim != 1 {
            return Err(Error::Shape(format!("cannot promote ℓ={} to ℓ={dim}", self.dim)));
        }
        let mut out = Self::zero(self.g, dim);
        for (w, c) in &self.terms {
            out.add_term(w.clone(), Mat::identity(dim, dim) * c[(0, 0)]);
        }
        Ok(out)
    }

    /// Largest coefficient entry in absolute value.
    pub fn max_coeff(&self) -> f64 {
        self.terms.values().map(max_abs).fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self) -> bool {
        self.terms.values().all(|c| (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || c[(i, j)] == 0.0)))
    }

    /// Scalar polynomial in diagonal slot `i`.
    pub fn diagonal_entry(&self, i: usize) -> Self {
        let mut out = Self::zero(self.g, 1);
        for (w, c) in &self.terms {
            out.add_term(w.clone(), Mat::from_element(1, 1, c[(i, i)]));
        }
        out
    }

    fn fmt_scalar(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (w, c) in &self.terms {
            let v = c[(0, 0)];
            let mag = v.abs();
            if first {
                if v < 0.0 {
                    write!(f, "-")?;
                }
            } else if v < 0.0 {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            first = false;
            if w.is_empty() {
                write!(f, "{mag}")?;
                continue;
            }
            if mag != 1.0 {
                write!(f, "{mag}*")?;
            }
            let letters: Vec<usize> = w.letters().collect();
            let mut i = 0;
            let mut factors = Vec::new();
            while i < letters.len() {
                let mut k = i;
                while k < letters.len() && letters[k] == letters[i] {
                    k += 1;
                }
                let run = k - i;
                if run == 1 {
                    factors.push(format!("x{}", letters[i]));
                } else {
                    factors.push(format!("x{}^{}", letters[i], run));
                }
                i = k;
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

impl fmt::Display for MatrixPoly {
    /// Canonical text in the polynomial grammar; block polynomials print as
    /// `diag(...)` when diagonal.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dim == 1 {
            return self.fmt_scalar(f);
        }
        if self.is_diagonal() {
            write!(f, "diag(")?;
            for i in 0..self.dim {
                if i > 0 {
                    write!(f, " ; ")?;
                }
                self.diagonal_entry(i).fmt_scalar(f)?;
            }
            return write!(f, ")");
        }
        write!(f, "<{}x{} matrix polynomial with {} terms>", self.dim, self.dim, self.terms.len())
    }
}

impl Add for &MatrixPoly {
    type Output = MatrixPoly;
    fn add(self, rhs: Self) -> MatrixPoly {
        self.try_add(rhs).expect("polynomial shapes must match")
    }
}

impl Sub for &MatrixPoly {
    type Output = MatrixPoly;
    fn sub(self, rhs: Self) -> MatrixPoly {
        self.try_sub(rhs).expect("polynomial shapes must match")
    }
}

impl Mul for &MatrixPoly {
    type Output = MatrixPoly;
    fn mul(self, rhs: Self) -> MatrixPoly {
        self.try_mul(rhs).expect("polynomial shapes must match")
    }
}

impl Neg for &MatrixPoly {
    type Output = MatrixPoly;
    fn neg(self) -> MatrixPoly {
        self.scale(-1.0)
    }
}

/// `P(X) = Σ B_w ⊗ w(X)`, an `ℓn×ℓn` matrix.
pub fn eval_poly(p: &MatrixPoly, x: &MatrixTuple) -> Result<Mat> {
    if p.g() != x.g() {
        return Err(Error::Shape(format!("polynomial in {} variables evaluated at a {}-tuple", p.g(), x.g())));
    }
    let n = x.n();
    let mut out = Mat::zeros(p.dim() * n, p.dim() * n);
    for (w, c) in p.terms() {
        out += kron(c, &eval_word(w, x)?);
    }
    Ok(out)
}

/// Parse a polynomial in `x1..xg`.
///
/// ```text
/// expr   := term (('+'|'-') term)*
/// term   := ['-'] factor ('*' factor)*
/// factor := base ('^' uint)?
/// base   := number | 'x' uint | '(' expr ')' | 'diag(' expr (';' expr)* ')'
/// ```
pub fn parse_poly(text: &str, g: usize) -> Result<MatrixPoly> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, g };
    let out = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(out)
}

/// Smallest `g` that covers every `x<k>` in `text` (at least 1).
pub fn infer_g(text: &str) -> usize {
    let bytes = text.as_bytes();
    let mut g = 1;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'x' {
            let start = i + 1;
            let mut k = start;
            while k < bytes.len() && bytes[k].is_ascii_digit() {
                k += 1;
            }
            if let Ok(v) = text[start..k].parse::<usize>() {
                g = g.max(v);
            }
            i = k;
        } else {
            i += 1;
        }
    }
    g
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    g: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn combine(
        &self,
        a: MatrixPoly,
        b: MatrixPoly,
        op: impl Fn(&MatrixPoly, &MatrixPoly) -> Result<MatrixPoly>,
    ) -> Result<MatrixPoly> {
        let dim = a.dim().max(b.dim());
        let a = a.promote(dim).map_err(|_| self.err("block dimensions do not match"))?;
        let b = b.promote(dim).map_err(|_| self.err("block dimensions do not match"))?;
        op(&a, &b)
    }

    fn expr(&mut self) -> Result<MatrixPoly> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                let t = self.term()?;
                acc = self.combine(acc, t, MatrixPoly::try_add)?;
            } else if self.peek() == Some(b'-') {
                self.pos += 1;
                let t = self.term()?;
                acc = self.combine(acc, t, MatrixPoly::try_sub)?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<MatrixPoly> {
        let negate = self.eat(b'-');
        let mut acc = self.factor()?;
        while self.eat(b'*') {
            let f = self.factor()?;
            acc = self.combine(acc, f, MatrixPoly::try_mul)?;
        }
        Ok(if negate { acc.scale(-1.0) } else { acc })
    }

    fn factor(&mut self) -> Result<MatrixPoly> {
        let base = self.base()?;
        if self.eat(b'^') {
            self.skip_ws();
            let k = self.uint()?;
            return Ok(base.pow(k as u32));
        }
        Ok(base)
    }

    fn uint(&mut self) -> Result<usize> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected an unsigned integer"));
        }
        std::str::from_utf8(&self.src[start..self.pos]).unwrap().parse().map_err(|_| self.err("integer out of range"))
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap();
        text.parse::<f64>().map_err(|_| Error::Parse { pos: start, msg: format!("bad number `{text}`") })
    }

    fn base(&mut self) -> Result<MatrixPoly> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let v = self.number()?;
                Ok(MatrixPoly::constant(self.g, 1, v))
            }
            Some(b'x') => {
                self.pos += 1;
                let at = self.pos;
                let j = self.uint()?;
                if j == 0 || j > self.g {
                    return Err(Error::Parse {
                        pos: at,
                        msg: Error::UnknownVariable { index: j, g: self.g }.to_string(),
                    });
                }
                Ok(MatrixPoly::var(self.g, j))
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(e)
            }
            Some(b'd') if self.src[self.pos..].starts_with(b"diag") => {
                self.pos += 4;
                if !self.eat(b'(') {
                    return Err(self.err("expected `(` after diag"));
                }
                let mut parts = vec![self.expr()?];
                while self.eat(b';') {
                    parts.push(self.expr()?);
                }
                if !self.eat(b')') {
                    return Err(self.err("expected `)` closing diag"));
                }
                MatrixPoly::diag(&parts).map_err(|e| self.err(&e.to_string()))
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }
}
