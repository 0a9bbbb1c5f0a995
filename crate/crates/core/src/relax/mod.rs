//! The level-`d` moment relaxation `L_p(n; d)` and its projection onto the
//! first moments.
//!
//! Free parameters are the entries of the moment classes `{α, α*}` with
//! `2 <= |α| <= Dmax`; `Y_∅ = I` and `Y_{x_j} = X_j` are substituted. The
//! constraints are `H_{d+⌈deg p/2⌉}(Y) ⪰ 0` and `H↑_{p,d}(Y) ⪰ 0`.

mod pencil;
mod quadmod;

use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::ser_mats;
use crate::matops::{min_eig, Mat};
use crate::moments::{build_hankel, build_localizing, MomentSequence};
use crate::ncpoly::{enumerate_words, MatrixPoly, MatrixTuple, Word};
use crate::sdp::{self, AffineMatrixProblem, InfeasibilityCertificate, SolverConfig, SparseSym, Status, Verdict};

pub use pencil::{
    build_mixed_pencil, monic_normalize, split_symmetrize, MixedPencil, MonicNormalization, SymSlotSource,
    SymmetrizedPencil,
};
pub use quadmod::{
    archimedean_residual, quad_module_membership, verify_archimedean_identity, QuadModuleCertificate, QuadModuleOutcome,
};

#[derive(Debug, Clone, Copy, Default)]
pub struct RelaxConfig {
    /// Explicit box radius; overrides the default below.
    pub box_radius: Option<f64>,
    /// Archimedean constant `C` bounding `‖X_j‖` on `D_p`, if known.
    pub archimedean_c: Option<f64>,
    pub solver: SolverConfig,
}

impl RelaxConfig {
    pub fn with_archimedean(c: f64) -> Self {
        RelaxConfig { archimedean_c: Some(c), ..Self::default() }
    }

    /// `max(10, 2·C^Dmax)` when `C` is known, else `10³`.
    pub fn radius_for(&self, dmax: usize) -> f64 {
        if let Some(r) = self.box_radius {
            return r;
        }
        match self.archimedean_c {
            Some(c) => (2.0 * c.powi(dmax as i32)).max(10.0),
            None => 1e3,
        }
    }
}

/// Largest word length read by the level-`d` constraints.
pub fn moment_degree(p: &MatrixPoly, d: usize) -> usize {
    let delta = p.degree();
    (2 * (d + delta.div_ceil(2))).max(2 * d + delta)
}

/// A free scalar: entry `(row, col)` of the class representative `word`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParamSlot {
    pub word: String,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, Copy)]
enum Source {
    One,
    Zero,
    Param(usize),
    X(usize),
}

#[derive(Debug, Clone)]
struct BlockTemplate {
    name: String,
    constant: Mat,
    params: Vec<SparseSym>,
    xvars: Vec<SparseSym>,
}

/// The relaxation at a fixed `(p, n, d)`, with the first moments kept symbolic
/// so that the constant term is affine in `X`.
#[derive(Debug, Clone)]
pub struct RelaxationProblem {
    p: MatrixPoly,
    n: usize,
    d: usize,
    dmax: usize,
    hankel_level: usize,
    params: Vec<ParamSlot>,
    class_offset: BTreeMap<Word, usize>,
    templates: Vec<BlockTemplate>,
}

fn upper_offset(n: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    a * n - a * a.saturating_sub(1) / 2 + (b - a)
}

impl RelaxationProblem {
    pub fn new(p: &MatrixPoly, n: usize, d: usize) -> Result<Self> {
        if !p.is_numerically_symmetric() {
            return Err(Error::Invalid("p is not symmetric (p* ≠ p)".into()));
        }
        if n == 0 {
            return Err(Error::Invalid("matrix size n must be positive".into()));
        }
        let g = p.g();
        let dmax = moment_degree(p, d);
        let hankel_level = d + p.degree().div_ceil(2);
        let mut params = Vec::new();
        let mut class_offset = BTreeMap::new();
        for w in enumerate_words(g, dmax) {
            if w.len() < 2 || w.class_rep().1 {
                continue;
            }
            class_offset.insert(w.clone(), params.len());
            let key = w.key();
            for r in 0..n {
                let start = if w.is_palindrome() { r } else { 0 };
                for c in start..n {
                    params.push(ParamSlot { word: key.clone(), row: r, col: c });
                }
            }
        }
        let mut rp = RelaxationProblem {
            p: p.symmetric_part(),
            n,
            d,
            dmax,
            hankel_level,
            params,
            class_offset,
            templates: Vec::new(),
        };
        rp.templates = vec![rp.hankel_template(), rp.localizing_template()];
        Ok(rp)
    }

    pub fn poly(&self) -> &MatrixPoly {
        &self.p
    }

    pub fn g(&self) -> usize {
        self.p.g()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn level(&self) -> usize {
        self.d
    }

    /// Degree cap of the moment sequence.
    pub fn dmax(&self) -> usize {
        self.dmax
    }

    pub fn hankel_level(&self) -> usize {
        self.hankel_level
    }

    pub fn params(&self) -> &[ParamSlot] {
        &self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Number of free moment classes.
    pub fn num_classes(&self) -> usize {
        self.class_offset.len()
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.templates.iter().map(|t| t.constant.nrows()).collect()
    }

    fn num_xvars(&self) -> usize {
        self.g() * self.n * (self.n + 1) / 2
    }

    fn source(&self, w: &Word, r: usize, c: usize) -> Source {
        let (rep, flipped) = w.class_rep();
        let (r, c) = if flipped { (c, r) } else { (r, c) };
        let n = self.n;
        match rep.len() {
            0 => {
                if r == c {
                    Source::One
                } else {
                    Source::Zero
                }
            }
            1 => {
                let j = rep.max_letter() - 1;
                Source::X(j * n * (n + 1) / 2 + upper_offset(n, r, c))
            }
            _ => {
                let off = self.class_offset[&rep];
                if rep.is_palindrome() {
                    Source::Param(off + upper_offset(n, r, c))
                } else {
                    Source::Param(off + r * n + c)
                }
            }
        }
    }

    fn empty_template(&self, name: &str, dim: usize) -> BlockTemplate {
        BlockTemplate {
            name: name.to_string(),
            constant: Mat::zeros(dim, dim),
            params: vec![SparseSym::new(); self.num_params()],
            xvars: vec![SparseSym::new(); self.num_xvars()],
        }
    }

    fn place(&self, t: &mut BlockTemplate, row: usize, col: usize, w: &Word, r: usize, c: usize, coef: f64) {
        match self.source(w, r, c) {
            Source::One => t.constant[(row, col)] += coef,
            Source::Zero => {}
            Source::Param(i) => t.params[i].push(row, col, coef),
            Source::X(k) => t.xvars[k].push(row, col, coef),
        }
    }

    fn hankel_template(&self) -> BlockTemplate {
        let n = self.n;
        let words = enumerate_words(self.g(), self.hankel_level);
        let mut t = self.empty_template("hankel", words.len() * n);
        for (ai, a) in words.iter().enumerate() {
            for (bi, b) in words.iter().enumerate() {
                let w = a.sandwich(&Word::empty(), b);
                for r in 0..n {
                    for c in 0..n {
                        self.place(&mut t, ai * n + r, bi * n + c, &w, r, c, 1.0);
                    }
                }
            }
        }
        t
    }

    fn localizing_template(&self) -> BlockTemplate {
        let n = self.n;
        let l = self.p.dim();
        let words = enumerate_words(self.g(), self.d);
        let bd = l * n;
        let mut t = self.empty_template("localizing", words.len() * bd);
        for (ai, a) in words.iter().enumerate() {
            for (bi, b) in words.iter().enumerate() {
                for (gamma, coeff) in self.p.terms() {
                    let w = a.sandwich(gamma, b);
                    for i in 0..l {
                        for j in 0..l {
                            let pij = coeff[(i, j)];
                            if pij == 0.0 {
                                continue;
                            }
                            for r in 0..n {
                                for c in 0..n {
                                    self.place(&mut t, ai * bd + i * n + r, bi * bd + j * n + c, &w, r, c, pij);
                                }
                            }
                        }
                    }
                }
            }
        }
        t
    }

    fn x_values(&self, x: &MatrixTuple) -> Result<Vec<f64>> {
        if x.g() != self.g() || x.n() != self.n {
            return Err(Error::Shape(format!(
                "expected {} matrices of size {}, got {} of size {}",
                self.g(),
                self.n,
                x.g(),
                x.n()
            )));
        }
        let mut out = Vec::with_capacity(self.num_xvars());
        for xj in x.mats() {
            for a in 0..self.n {
                for b in a..self.n {
                    out.push(xj[(a, b)]);
                }
            }
        }
        Ok(out)
    }

    /// The SDP at the point `x`, with the given box radius.
    pub fn problem_at(&self, x: &MatrixTuple, box_radius: f64) -> Result<AffineMatrixProblem> {
        let xv = self.x_values(x)?;
        let labels = self.params.iter().map(|s| format!("Y[{}]({},{})", s.word, s.row, s.col)).collect();
        let mut problem = AffineMatrixProblem::new(labels, box_radius)?;
        for t in &self.templates {
            let mut f0 = t.constant.clone();
            for (k, s) in t.xvars.iter().enumerate() {
                if xv[k] != 0.0 {
                    for (r, c, v) in s.entries() {
                        f0[(r, c)] += v * xv[k];
                    }
                }
            }
            problem.push_block(t.name.clone(), f0, t.params.clone())?;
        }
        Ok(problem)
    }

    /// The moment sequence with first moments `x` and free entries `u`.
    pub fn witness(&self, x: &MatrixTuple, u: &[f64]) -> Result<MomentSequence> {
        if u.len() != self.num_params() {
            return Err(Error::Shape(format!("{} parameters expected, got {}", self.num_params(), u.len())));
        }
        let xv = self.x_values(x)?;
        let n = self.n;
        Ok(MomentSequence::from_fn(self.g(), n, self.dmax, |rep| {
            Mat::from_fn(n, n, |r, c| match self.source(rep, r, c) {
                Source::One => 1.0,
                Source::Zero => 0.0,
                Source::Param(i) => u[i],
                Source::X(k) => xv[k],
            })
        }))
    }
}

/// `assemble(p, n, d, X)`: the symbolic relaxation and its SDP at `X`.
pub fn assemble(
    p: &MatrixPoly,
    x: &MatrixTuple,
    d: usize,
    cfg: &RelaxConfig,
) -> Result<(RelaxationProblem, AffineMatrixProblem)> {
    let rp = RelaxationProblem::new(p, x.n(), d)?;
    let problem = rp.problem_at(x, cfg.radius_for(rp.dmax))?;
    Ok((rp, problem))
}

/// Smallest eigenvalues of `H_{d+⌈deg p/2⌉}(Y)` and `H↑_{p,d}(Y)`.
pub fn witness_margins(p: &MatrixPoly, y: &MomentSequence, d: usize) -> Result<(f64, f64)> {
    let k = d + p.degree().div_ceil(2);
    let h = min_eig(&build_hankel(y, k)?.flatten())?;
    let l = min_eig(&build_localizing(p, y, d)?.flatten())?;
    Ok((h, l))
}

#[derive(Debug, Clone)]
pub struct Membership {
    pub verdict: Verdict,
    pub box_radius: f64,
    /// Moment sequence at the solver point (feasible or marginal verdicts).
    pub witness: Option<MomentSequence>,
    /// `(λmin H, λmin H↑)` of the witness, computed from the sequence itself.
    pub witness_margins: Option<(f64, f64)>,
}

impl Membership {
    pub fn status(&self) -> Status {
        self.verdict.status
    }
}

/// Is `x` in the projection `L̂_p(n; d)`?
pub fn membership(p: &MatrixPoly, x: &MatrixTuple, d: usize, cfg: &RelaxConfig) -> Result<Membership> {
    let (rp, problem) = assemble(p, x, d, cfg)?;
    let verdict = sdp::solve_with(&problem, &cfg.solver)?;
    let (witness, witness_margins) = match &verdict.point {
        Some(u) if verdict.status != Status::Infeasible => {
            let y = rp.witness(x, u)?;
            let m = witness_margins(p, &y, d)?;
            (Some(y), Some(m))
        }
        _ => (None, None),
    };
    Ok(Membership { verdict, box_radius: problem.box_radius(), witness, witness_margins })
}

/// `ℓ(X) = c₀ + Σ_j tr(C_j X_j)`, negative at the separated point and
/// nonnegative on the relaxation (for members with witnesses inside the box).
#[derive(Debug, Clone, Serialize)]
pub struct SeparationFunctional {
    pub c0: f64,
    #[serde(serialize_with = "ser_mats")]
    pub coeffs: Vec<Mat>,
    pub provenance: String,
}

impl SeparationFunctional {
    pub fn eval(&self, x: &MatrixTuple) -> Result<f64> {
        if x.g() != self.coeffs.len() || x.n() != self.coeffs[0].nrows() {
            return Err(Error::Shape("point does not match the functional".into()));
        }
        Ok(self.c0 + self.coeffs.iter().zip(x.mats()).map(|(c, xj)| c.dot(xj)).sum::<f64>())
    }
}

fn certificate_hash(cert: &InfeasibilityCertificate) -> String {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for m in &cert.multipliers {
        m.nrows().hash(&mut h);
        for v in m.iter() {
            v.to_bits().hash(&mut h);
        }
    }
    for v in cert.box_plus.iter().chain(&cert.box_minus).chain(std::iter::once(&cert.gap)) {
        v.to_bits().hash(&mut h);
    }
    format!("{:016x}", h.finish())
}

/// Reads the affine functional off an infeasibility certificate of
/// `rp.problem_at(·, R)`.
pub fn separation_from_certificate(
    rp: &RelaxationProblem,
    cert: &InfeasibilityCertificate,
    box_radius: f64,
) -> Result<SeparationFunctional> {
    if cert.multipliers.len() != rp.templates.len() {
        return Err(Error::Shape("certificate does not match the relaxation blocks".into()));
    }
    let box_sum: f64 = cert.box_plus.iter().chain(&cert.box_minus).sum();
    let mut c0 = box_radius * box_sum;
    let mut v = vec![0.0; rp.num_xvars()];
    for (t, lam) in rp.templates.iter().zip(&cert.multipliers) {
        c0 += t.constant.dot(lam);
        for (k, s) in t.xvars.iter().enumerate() {
            v[k] += s.trace_with(lam);
        }
    }
    let n = rp.n;
    let per = n * (n + 1) / 2;
    let coeffs = (0..rp.g())
        .map(|j| {
            let mut c = Mat::zeros(n, n);
            for a in 0..n {
                for b in a..n {
                    let val = v[j * per + upper_offset(n, a, b)];
                    if a == b {
                        c[(a, a)] = val;
                    } else {
                        c[(a, b)] = val / 2.0;
                        c[(b, a)] = val / 2.0;
                    }
                }
            }
            c
        })
        .collect();
    Ok(SeparationFunctional { c0, coeffs, provenance: certificate_hash(cert) })
}

/// Membership followed by functional extraction; errors unless the point is
/// certified outside the relaxation.
pub fn separate(
    p: &MatrixPoly,
    x: &MatrixTuple,
    d: usize,
    cfg: &RelaxConfig,
) -> Result<(SeparationFunctional, Verdict)> {
    let (rp, problem) = assemble(p, x, d, cfg)?;
    let verdict = sdp::solve_with(&problem, &cfg.solver)?;
    let cert = match (&verdict.status, &verdict.certificate) {
        (Status::Infeasible, Some(c)) => c,
        _ => {
            return Err(Error::NoSeparation(format!(
                "point is not certified outside the relaxation (status {:?}, margin {:.3e})",
                verdict.status, verdict.margin
            )))
        }
    };
    let f = separation_from_certificate(&rp, cert, problem.box_radius())?;
    Ok((f, verdict))
}
