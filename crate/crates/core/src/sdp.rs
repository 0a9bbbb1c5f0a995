//! Block-affine PSD feasibility engine.
//!
//! Solves
//!
//! ```text
//!     maximize t  subject to  F_b(u) = F0_b + Σ_i u_i F_i^b ⪰ t I   (all blocks b)
//!                             -R <= u_i <= R
//! ```
//!
//! with a path-following log-barrier method (damped Newton on `(u, t)`), and
//! reads a Farkas-type infeasibility certificate off the central path:
//! `Λ_b = S_b^{-1}/τ` and box multipliers `1/(τ(R ± u_i))`.
//!
//! Infeasibility is always relative to the box: an `Infeasible` verdict says no
//! `u` with `‖u‖∞ <= R` makes every block PSD.

use nalgebra::{Cholesky, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{ser_mat, ser_mats};
use crate::matops::{sym_eig, Mat};

/// Symmetric sparse coefficient matrix, stored with both triangles expanded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseSym {
    entries: Vec<(u32, u32, f64)>,
}

impl SparseSym {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `v` at `(r, c)` and at `(c, r)` (once on the diagonal).
    pub fn add_sym(&mut self, r: usize, c: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        self.entries.push((r as u32, c as u32, v));
        if r != c {
            self.entries.push((c as u32, r as u32, v));
        }
    }

    /// Adds `v` at `(r, c)` only; the caller supplies the mirrored entry.
    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        if v != 0.0 {
            self.entries.push((r as u32, c as u32, v));
        }
    }

    /// Sort and merge duplicate positions, dropping exact zeros.
    pub fn compact(&mut self) {
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(u32, u32, f64)> = Vec::with_capacity(self.entries.len());
        for &(r, c, v) in &self.entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);
        self.entries = merged;
    }

    pub fn from_dense(m: &Mat) -> Self {
        let mut s = SparseSym::new();
        for r in 0..m.nrows() {
            for c in r..m.ncols() {
                s.add_sym(r, c, 0.5 * (m[(r, c)] + m[(c, r)]));
            }
        }
        s.compact();
        s
    }

    pub fn to_dense(&self, dim: usize) -> Mat {
        let mut m = Mat::zeros(dim, dim);
        for &(r, c, v) in &self.entries {
            m[(r as usize, c as usize)] += v;
        }
        m
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|&(r, c, v)| (r as usize, c as usize, v))
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `tr(A · self)` for symmetric `A`.
    pub fn trace_with(&self, a: &Mat) -> f64 {
        self.entries.iter().map(|&(r, c, v)| v * a[(c as usize, r as usize)]).sum()
    }

    fn add_scaled_to(&self, target: &mut Mat, s: f64) {
        for &(r, c, v) in &self.entries {
            target[(r as usize, c as usize)] += s * v;
        }
    }
}

/// One PSD constraint `F0 + Σ u_i F_i ⪰ 0`.
#[derive(Debug, Clone)]
pub struct MatrixBlock {
    pub name: String,
    pub constant: Mat,
    pub coeffs: Vec<SparseSym>,
}

impl MatrixBlock {
    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn eval(&self, u: &[f64]) -> Mat {
        let mut m = self.constant.clone();
        for (ui, f) in u.iter().zip(&self.coeffs) {
            if *ui != 0.0 {
                f.add_scaled_to(&mut m, *ui);
            }
        }
        m
    }
}

/// Canonical form for every "⪰ 0" constraint set solved in this crate.
#[derive(Debug, Clone)]
pub struct AffineMatrixProblem {
    num_params: usize,
    blocks: Vec<MatrixBlock>,
    box_radius: f64,
    labels: Vec<String>,
}

impl AffineMatrixProblem {
    pub fn new(labels: Vec<String>, box_radius: f64) -> Result<Self> {
        if !(box_radius.is_finite() && box_radius > 0.0) {
            return Err(Error::Invalid(format!("box radius must be positive and finite, got {box_radius}")));
        }
        Ok(AffineMatrixProblem { num_params: labels.len(), blocks: Vec::new(), box_radius, labels })
    }

    pub fn push_block(&mut self, name: impl Into<String>, constant: Mat, mut coeffs: Vec<SparseSym>) -> Result<()> {
        let name = name.into();
        if !constant.is_square() {
            return Err(Error::Shape(format!("block {name}: constant term is not square")));
        }
        if !crate::matops::is_symmetric(&constant, 1e-12) {
            return Err(Error::NotSymmetric(crate::matops::asymmetry(&constant)));
        }
        if coeffs.len() != self.num_params {
            return Err(Error::Shape(format!(
                "block {name}: {} coefficient matrices for {} parameters",
                coeffs.len(),
                self.num_params
            )));
        }
        let k = constant.nrows();
        for f in &mut coeffs {
            f.compact();
            for (r, c, v) in f.entries() {
                if r >= k || c >= k {
                    return Err(Error::Shape(format!("block {name}: coefficient entry ({r},{c}) outside {k}x{k}")));
                }
                if !v.is_finite() {
                    return Err(Error::Invalid(format!("block {name}: non-finite coefficient")));
                }
            }
        }
        self.blocks.push(MatrixBlock { name, constant, coeffs });
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn blocks(&self) -> &[MatrixBlock] {
        &self.blocks
    }

    pub fn box_radius(&self) -> f64 {
        self.box_radius
    }

    pub fn set_box_radius(&mut self, r: f64) {
        self.box_radius = r;
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(MatrixBlock::dim).sum()
    }

    pub fn eval(&self, u: &[f64]) -> Vec<Mat> {
        self.blocks.iter().map(|b| b.eval(u)).collect()
    }

    /// `min_b λmin(F_b(u))`.
    pub fn margin(&self, u: &[f64]) -> Result<f64> {
        let mut t = f64::INFINITY;
        for b in &self.blocks {
            t = t.min(sym_eig(&b.eval(u))?.min());
        }
        Ok(t)
    }

    /// Multiply every `F` matrix by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.blocks {
            b.constant *= c;
            for f in &mut b.coeffs {
                for e in &mut f.entries {
                    e.2 *= c;
                }
            }
        }
        out
    }

    pub fn dump(&self) -> ProblemDump {
        ProblemDump {
            box_radius: self.box_radius,
            labels: self.labels.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockDump {
                    name: b.name.clone(),
                    constant: b.constant.clone(),
                    coeffs: b.coeffs.iter().map(|f| f.to_dense(b.dim())).collect(),
                })
                .collect(),
        }
    }
}

/// Debug dump of a problem with dense coefficient matrices.
#[derive(Debug, Serialize)]
pub struct ProblemDump {
    pub box_radius: f64,
    pub labels: Vec<String>,
    pub blocks: Vec<BlockDump>,
}

#[derive(Debug, Serialize)]
pub struct BlockDump {
    pub name: String,
    #[serde(serialize_with = "ser_mat")]
    pub constant: Mat,
    #[serde(serialize_with = "ser_mats")]
    pub coeffs: Vec<Mat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    StrictlyFeasible,
    Infeasible,
    Marginal,
}

/// Farkas data for the box-bounded problem. It verifies via
///
/// ```text
///   Σ_b tr(Λ_b F_i^b) + λ⁺_i − λ⁻_i = 0                 for every i
///   Σ_b tr(Λ_b F0_b) + R Σ_i (λ⁺_i + λ⁻_i) = −gap,      gap > 0
/// ```
///
/// which rules out every `u` in the box making all blocks PSD.
#[derive(Debug, Clone, Serialize)]
pub struct InfeasibilityCertificate {
    #[serde(serialize_with = "ser_mats")]
    pub multipliers: Vec<Mat>,
    pub box_plus: Vec<f64>,
    pub box_minus: Vec<f64>,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub status: Status,
    /// Best margin `t` reached (a certified lower bound on the optimum).
    pub margin: f64,
    /// Upper bound on the optimum from the dual multipliers.
    pub dual_bound: f64,
    pub point: Option<Vec<f64>>,
    pub certificate: Option<InfeasibilityCertificate>,
    pub iterations: usize,
    pub diagnostics: Option<String>,
}

impl Verdict {
    pub fn is_feasible(&self) -> bool {
        self.status == Status::StrictlyFeasible
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// `t > eps_feas` is strict feasibility, `t < -eps_feas` infeasibility.
    pub eps_feas: f64,
    /// Target duality gap on `t`, relative to `max(1, |t|)`.
    pub gap_tol: f64,
    pub max_newton: usize,
    pub dim_cap: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { eps_feas: 1e-7, gap_tol: 1e-8, max_newton: 600, dim_cap: 4000 }
    }
}

pub fn solve(problem: &AffineMatrixProblem, tol: f64) -> Result<Verdict> {
    solve_with(problem, &SolverConfig { eps_feas: tol, ..SolverConfig::default() })
}

pub fn solve_with(problem: &AffineMatrixProblem, cfg: &SolverConfig) -> Result<Verdict> {
    let dim = problem.total_dim();
    if dim > cfg.dim_cap {
        return Err(Error::DimensionCap { dim, cap: cfg.dim_cap });
    }
    if problem.blocks.is_empty() {
        return Err(Error::Invalid("problem has no PSD blocks".into()));
    }
    if problem.num_params == 0 {
        return solve_constant(problem, cfg);
    }
    Barrier::new(problem, cfg).run()
}

/// No free parameters: the optimum is the smallest eigenvalue over the blocks.
fn solve_constant(problem: &AffineMatrixProblem, cfg: &SolverConfig) -> Result<Verdict> {
    let mut best = (f64::INFINITY, 0usize, DVector::zeros(0));
    for (bi, b) in problem.blocks.iter().enumerate() {
        let e = sym_eig(&b.constant)?;
        if e.min() < best.0 {
            best = (e.min(), bi, e.vectors.column(0).into_owned());
        }
    }
    let (t, bi, v) = best;
    let status = classify(t, t, cfg.eps_feas);
    let certificate = (status == Status::Infeasible).then(|| {
        let multipliers = problem
            .blocks
            .iter()
            .enumerate()
            .map(|(k, b)| if k == bi { &v * v.transpose() } else { Mat::zeros(b.dim(), b.dim()) })
            .collect();
        InfeasibilityCertificate { multipliers, box_plus: vec![], box_minus: vec![], gap: -t }
    });
    Ok(Verdict {
        status,
        margin: t,
        dual_bound: t,
        point: (status != Status::Infeasible).then(Vec::new),
        certificate,
        iterations: 0,
        diagnostics: None,
    })
}

fn classify(lower: f64, upper: f64, eps: f64) -> Status {
    if lower > eps {
        Status::StrictlyFeasible
    } else if upper < -eps {
        Status::Infeasible
    } else {
        Status::Marginal
    }
}

/// Per-block precomputed sparsity: which parameters touch the block.
struct BlockIndex {
    params: Vec<usize>,
}

struct Barrier<'a> {
    p: &'a AffineMatrixProblem,
    cfg: &'a SolverConfig,
    index: Vec<BlockIndex>,
    nu: f64,
}

struct Iterate {
    u: Vec<f64>,
    t: f64,
}

struct Derivs {
    value: f64,
    grad: DVector<f64>,
    hess: Mat,
    inverses: Vec<Mat>,
}

impl<'a> Barrier<'a> {
    fn new(p: &'a AffineMatrixProblem, cfg: &'a SolverConfig) -> Self {
        let index = p
            .blocks
            .iter()
            .map(|b| BlockIndex { params: (0..p.num_params).filter(|&i| !b.coeffs[i].is_empty()).collect() })
            .collect();
        let nu = (p.total_dim() + 2 * p.num_params) as f64;
        Barrier { p, cfg, index, nu }
    }

    fn slack(&self, b: usize, z: &Iterate) -> Mat {
        let mut s = self.p.blocks[b].eval(&z.u);
        for i in 0..s.nrows() {
            s[(i, i)] -= z.t;
        }
        s
    }

    /// Barrier value `-τt - Σ logdet S_b - Σ log(R² - u_i²)`, or `None`
    /// outside the domain.
    fn value(&self, z: &Iterate, tau: f64) -> Option<f64> {
        let r = self.p.box_radius;
        let mut v = -tau * z.t;
        for &ui in &z.u {
            let s = r * r - ui * ui;
            if s <= 0.0 {
                return None;
            }
            v -= s.ln();
        }
        for b in 0..self.p.blocks.len() {
            let chol = Cholesky::new(self.slack(b, z))?;
            let ld: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
            v -= ld;
        }
        Some(v)
    }

    fn derivs(&self, z: &Iterate, tau: f64) -> Option<Derivs> {
        let m = self.p.num_params;
        let r = self.p.box_radius;
        let mut grad = DVector::zeros(m + 1);
        let mut hess = Mat::zeros(m + 1, m + 1);
        let mut value = -tau * z.t;
        grad[m] = -tau;
        for (i, &ui) in z.u.iter().enumerate() {
            let (a, b) = (r - ui, r + ui);
            if a <= 0.0 || b <= 0.0 {
                return None;
            }
            value -= a.ln() + b.ln();
            grad[i] += 1.0 / a - 1.0 / b;
            hess[(i, i)] += 1.0 / (a * a) + 1.0 / (b * b);
        }
        let mut inverses = Vec::with_capacity(self.p.blocks.len());
        for (bi, block) in self.p.blocks.iter().enumerate() {
            let chol = Cholesky::new(self.slack(bi, z))?;
            value -= chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
            let sinv = chol.inverse();
            let params = &self.index[bi].params;
            // gradient: -tr(S⁻¹ F_i), and +tr(S⁻¹) for t
            let mut tr_inv = 0.0;
            for k in 0..sinv.nrows() {
                tr_inv += sinv[(k, k)];
            }
            grad[m] += tr_inv;
            // S⁻¹ F_i S⁻¹ traced against I for the (i, t) Hessian entries
            let sinv2 = &sinv * &sinv;
            hess[(m, m)] += sinv2.trace();
            for &i in params {
                let f = &block.coeffs[i];
                grad[i] -= f.trace_with(&sinv);
                hess[(i, m)] -= f.trace_with(&sinv2);
            }
            for (pi, &i) in params.iter().enumerate() {
                let fi = &block.coeffs[i];
                for &j in &params[pi..] {
                    let fj = &block.coeffs[j];
                    let mut acc = 0.0;
                    for (a, b, v) in fi.entries() {
                        for (rr, c, w) in fj.entries() {
                            acc += v * w * sinv[(b, rr)] * sinv[(c, a)];
                        }
                    }
                    hess[(i, j)] += acc;
                }
            }
            inverses.push(sinv);
        }
        for i in 0..=m {
            for j in 0..i {
                hess[(i, j)] = hess[(j, i)];
            }
        }
        Some(Derivs { value, grad, hess, inverses })
    }

    fn newton_direction(hess: &Mat, grad: &DVector<f64>) -> DVector<f64> {
        let mut h = hess.clone();
        let scale = (0..h.nrows()).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let mut reg = 0.0;
        loop {
            if let Some(ch) = Cholesky::new(h.clone()) {
                return -ch.solve(grad);
            }
            reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
            for i in 0..h.nrows() {
                h[(i, i)] = hess[(i, i)] + reg;
            }
        }
    }

    /// Dual bound from the current point. The multipliers are the barrier
    /// duals pushed one Newton step ahead, which satisfy stationarity up to
    /// rounding; the plain `S⁻¹/τ` duals are the fallback.
    fn certificate(&self, z: &Iterate, tau: f64, d: &Derivs) -> InfeasibilityCertificate {
        let r = self.p.box_radius;
        let plain = self.finish_certificate(
            d.inverses.iter().map(|s| s / tau).collect(),
            z.u.iter().map(|&ui| 1.0 / (tau * (r + ui))).collect(),
            z.u.iter().map(|&ui| 1.0 / (tau * (r - ui))).collect(),
        );
        let dir = Self::newton_direction(&d.hess, &d.grad);
        let decrement = -d.grad.dot(&dir);
        if !(decrement < 0.25) {
            return plain;
        }
        let m = self.p.num_params;
        let du = &dir.as_slice()[..m];
        let mut multipliers = Vec::with_capacity(self.p.blocks.len());
        for (block, sinv) in self.p.blocks.iter().zip(&d.inverses) {
            let mut ds = Mat::zeros(sinv.nrows(), sinv.ncols());
            for (i, &step) in du.iter().enumerate() {
                if step != 0.0 {
                    block.coeffs[i].add_scaled_to(&mut ds, step);
                }
            }
            for k in 0..ds.nrows() {
                ds[(k, k)] -= dir[m];
            }
            let lam = crate::matops::symmetrize(&((sinv - sinv * ds * sinv) / tau));
            match sym_eig(&lam) {
                Ok(e) if e.min() >= 0.0 => multipliers.push(lam),
                _ => return plain,
            }
        }
        let plus = z.u.iter().zip(du).map(|(&ui, &di)| (1.0 / (r + ui) - di / ((r + ui) * (r + ui))) / tau).collect();
        let minus = z.u.iter().zip(du).map(|(&ui, &di)| (1.0 / (r - ui) + di / ((r - ui) * (r - ui))) / tau).collect();
        let stepped = self.finish_certificate(multipliers, plus, minus);
        if stepped.box_plus.iter().chain(&stepped.box_minus).all(|&v| v >= 0.0) && stepped.gap > plain.gap {
            stepped
        } else {
            plain
        }
    }

    /// Normalizes `Σ tr Λ_b = 1` and moves any stationarity residual onto the
    /// box multipliers.
    fn finish_certificate(
        &self,
        mut multipliers: Vec<Mat>,
        mut plus: Vec<f64>,
        mut minus: Vec<f64>,
    ) -> InfeasibilityCertificate {
        let total: f64 = multipliers.iter().map(|l| l.trace()).sum();
        if total > 0.0 {
            for l in &mut multipliers {
                *l /= total;
            }
            for v in plus.iter_mut().chain(minus.iter_mut()) {
                *v /= total;
            }
        }
        for l in &mut multipliers {
            *l = crate::matops::symmetrize(l);
        }
        for i in 0..self.p.num_params {
            let mut res = plus[i] - minus[i];
            for (bi, block) in self.p.blocks.iter().enumerate() {
                res += block.coeffs[i].trace_with(&multipliers[bi]);
            }
            if res > 0.0 {
                minus[i] += res;
            } else {
                plus[i] -= res;
            }
        }
        let value = dual_value(self.p, &multipliers, &plus, &minus);
        InfeasibilityCertificate { multipliers, box_plus: plus, box_minus: minus, gap: -value }
    }

    fn run(&self) -> Result<Verdict> {
        let m = self.p.num_params;
        let mut z = Iterate { u: vec![0.0; m], t: 0.0 };
        let t0 = self.p.margin(&z.u)?;
        let scale = self.p.blocks.iter().map(|b| b.constant.amax()).fold(1.0, f64::max);
        z.t = t0 - scale.max(t0.abs()) * 0.5 - 1.0;

        let mut tau = self.nu / (scale + t0.abs()).max(1.0);
        let mut iterations = 0usize;
        let mut best_dual = f64::INFINITY;
        let mut best_cert: Option<InfeasibilityCertificate> = None;
        let mut stalled = false;
        let mut prev = (f64::NEG_INFINITY, f64::INFINITY);
        let mut flat_rounds = 0;

        'outer: loop {
            // centering
            let mut centered = false;
            for _ in 0..80 {
                if iterations >= self.cfg.max_newton {
                    break 'outer;
                }
                iterations += 1;
                let Some(d) = self.derivs(&z, tau) else {
                    return Err(Error::NoConvergence("iterate left the barrier domain".into()));
                };
                let dir = Self::newton_direction(&d.hess, &d.grad);
                let decrement = -d.grad.dot(&dir);
                if decrement.is_nan() {
                    stalled = true;
                    break 'outer;
                }
                if decrement < 1e-10 {
                    centered = true;
                    break;
                }
                let mut step = 1.0;
                let mut moved = false;
                for _ in 0..60 {
                    let cand = Iterate {
                        u: z.u.iter().zip(dir.iter()).map(|(a, b)| a + step * b).collect(),
                        t: z.t + step * dir[m],
                    };
                    if let Some(v) = self.value(&cand, tau) {
                        if v <= d.value - 0.25 * step * decrement {
                            z = cand;
                            moved = true;
                            break;
                        }
                    }
                    step *= 0.5;
                }
                if !moved {
                    // numerically centered as far as line search can tell
                    centered = decrement < 1e-6;
                    if !centered {
                        stalled = true;
                    }
                    break;
                }
                if decrement < 1e-8 && step == 1.0 {
                    centered = true;
                    break;
                }
            }
            if stalled {
                break;
            }
            let Some(d) = self.derivs(&z, tau) else {
                return Err(Error::NoConvergence("iterate left the barrier domain".into()));
            };
            if centered || iterations >= self.cfg.max_newton {
                let cert = self.certificate(&z, tau, &d);
                let bound = -cert.gap;
                if bound < best_dual {
                    best_dual = bound;
                    best_cert = Some(cert);
                }
            }
            let lower = z.t;
            if best_dual - lower <= self.cfg.gap_tol * lower.abs().max(1.0) {
                break;
            }
            if best_dual < -self.cfg.eps_feas && best_dual - lower <= 1e-6 {
                break;
            }
            if iterations >= self.cfg.max_newton {
                break;
            }
            // neither bound moves any more: further tau increases only burn iterations
            let tiny = 1e-13 * lower.abs().max(1.0);
            if lower - prev.0 <= tiny && prev.1 - best_dual <= tiny {
                flat_rounds += 1;
                if flat_rounds >= 2 {
                    break;
                }
            } else {
                flat_rounds = 0;
            }
            prev = (lower, best_dual);
            tau *= if centered { 8.0 } else { 2.0 };
        }

        let mut diagnostics = None;
        if stalled {
            diagnostics = Some(format!("Newton stalled after {iterations} steps; supergradient polish applied"));
            self.supergradient_polish(&mut z)?;
        } else if iterations >= self.cfg.max_newton {
            diagnostics = Some(format!("iteration cap {} reached", self.cfg.max_newton));
        }
        let margin = self.p.margin(&z.u)?.max(z.t);
        let status = classify(margin, best_dual, self.cfg.eps_feas);
        let certificate = if status == Status::Infeasible { best_cert } else { None };
        Ok(Verdict {
            status,
            margin,
            dual_bound: best_dual,
            point: (status != Status::Infeasible).then(|| z.u.clone()),
            certificate,
            iterations,
            diagnostics,
        })
    }

    /// Projected supergradient ascent on `u ↦ min_b λmin(F_b(u))`.
    fn supergradient_polish(&self, z: &mut Iterate) -> Result<()> {
        let r = self.p.box_radius;
        let mut best_u = z.u.clone();
        let mut best = self.p.margin(&z.u)?;
        let mut u = z.u.clone();
        for k in 0..200 {
            let mut worst = (f64::INFINITY, 0usize, DVector::zeros(0));
            for (bi, b) in self.p.blocks.iter().enumerate() {
                let e = sym_eig(&b.eval(&u))?;
                if e.min() < worst.0 {
                    worst = (e.min(), bi, e.vectors.column(0).into_owned());
                }
            }
            if worst.0 > best {
                best = worst.0;
                best_u = u.clone();
            }
            let vv = &worst.2 * worst.2.transpose();
            let g: Vec<f64> = self.p.blocks[worst.1].coeffs.iter().map(|f| f.trace_with(&vv)).collect();
            let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if gn == 0.0 {
                break;
            }
            let step = r / (10.0 * (k as f64 + 1.0)) / gn;
            for (ui, gi) in u.iter_mut().zip(&g) {
                *ui = (*ui + step * gi).clamp(-r, r);
            }
        }
        z.u = best_u;
        z.t = best.min(z.t.max(best));
        Ok(())
    }
}

fn dual_value(p: &AffineMatrixProblem, multipliers: &[Mat], plus: &[f64], minus: &[f64]) -> f64 {
    let mut v: f64 = p.blocks.iter().zip(multipliers).map(|(b, l)| (l.component_mul(&b.constant)).sum()).sum();
    v += p.box_radius * plus.iter().chain(minus.iter()).sum::<f64>();
    v
}

/// Checks the certificate identities directly against the problem data.
pub fn verify_certificate(cert: &InfeasibilityCertificate, problem: &AffineMatrixProblem) -> Result<bool> {
    verify_certificate_tol(cert, problem, 1e-6)
}

pub fn verify_certificate_tol(
    cert: &InfeasibilityCertificate,
    problem: &AffineMatrixProblem,
    tol: f64,
) -> Result<bool> {
    let m = problem.num_params();
    if cert.multipliers.len() != problem.blocks().len() || cert.box_plus.len() != m || cert.box_minus.len() != m {
        return Err(Error::Shape("certificate does not match the problem".into()));
    }
    for (l, b) in cert.multipliers.iter().zip(problem.blocks()) {
        if l.nrows() != b.dim() || l.ncols() != b.dim() {
            return Err(Error::Shape(format!("multiplier for block {} has the wrong size", b.name)));
        }
    }
    if !(cert.gap > 0.0) {
        return Ok(false);
    }
    let mut lam_scale = 0.0;
    for l in &cert.multipliers {
        if !crate::matops::is_symmetric(l, 1e-9) {
            return Ok(false);
        }
        let e = sym_eig(&crate::matops::symmetrize(l))?;
        if e.min() < -tol * (1.0 + e.max().abs()) {
            return Ok(false);
        }
        lam_scale += l.trace().abs();
    }
    if cert.box_plus.iter().chain(cert.box_minus.iter()).any(|&v| v < -tol) {
        return Ok(false);
    }
    let mut residual_total = 0.0;
    for i in 0..m {
        let mut res = cert.box_plus[i] - cert.box_minus[i];
        for (b, l) in problem.blocks().iter().zip(&cert.multipliers) {
            res += b.coeffs[i].trace_with(l);
        }
        if res.abs() > tol * (1.0 + lam_scale) {
            return Ok(false);
        }
        residual_total += res.abs();
    }
    let value = dual_value(problem, &cert.multipliers, &cert.box_plus, &cert.box_minus);
    if (value + cert.gap).abs() > tol * (1.0 + cert.gap.abs()) {
        return Ok(false);
    }
    // the stationarity residual can only loosen the bound by R Σ|res_i|
    Ok(value + problem.box_radius() * residual_total < 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_param(constant: Mat, coeff: Mat, r: f64) -> AffineMatrixProblem {
        let mut p = AffineMatrixProblem::new(vec!["u".into()], r).unwrap();
        p.push_block("F", constant, vec![SparseSym::from_dense(&coeff)]).unwrap();
        p
    }

    #[test]
    fn off_diagonal_parameter() {
        let p = single_param(Mat::identity(2, 2), Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]), 10.0);
        let v = solve(&p, 1e-7).unwrap();
        assert_eq!(v.status, Status::StrictlyFeasible);
        assert!((v.margin - 1.0).abs() < 1e-6, "{v:?}");
        assert!(v.point.as_ref().unwrap()[0].abs() < 1e-4);
    }

    #[test]
    fn diagonal_split() {
        let p = single_param(
            Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
            Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            10.0,
        );
        let v = solve(&p, 1e-7).unwrap();
        assert!((v.margin - 0.5).abs() < 1e-6);
        assert!((v.point.unwrap()[0] - 0.5).abs() < 1e-5);
    }

    #[test]
    fn constant_infeasible_block() {
        let mut p = AffineMatrixProblem::new(vec![], 10.0).unwrap();
        p.push_block("F", Mat::from_row_slice(2, 2, &[4.0, 3.0, 3.0, 2.0]), vec![]).unwrap();
        let v = solve(&p, 1e-7).unwrap();
        assert_eq!(v.status, Status::Infeasible);
        let cert = v.certificate.unwrap();
        assert!((cert.gap - (10f64.sqrt() - 3.0)).abs() < 1e-12);
        assert!((cert.gap - 0.162278 * cert.multipliers[0].trace()).abs() < 1e-6);
        assert!(verify_certificate(&cert, &p).unwrap());

        let mut negated = cert.clone();
        negated.multipliers[0] *= -1.0;
        negated.gap = -negated.gap;
        assert!(!verify_certificate(&negated, &p).unwrap());
        let mut flipped = cert.clone();
        flipped.multipliers[0] *= -1.0;
        assert!(!verify_certificate(&flipped, &p).unwrap());
        let mut zero_gap = cert;
        zero_gap.gap = 0.0;
        assert!(!verify_certificate(&zero_gap, &p).unwrap());
    }

    #[test]
    fn parametric_infeasible_certificate_verifies() {
        // [[u, 1], [1, -u]] has determinant -u² - 1 < 0 for every u
        let p = single_param(
            Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            10.0,
        );
        let v = solve(&p, 1e-7).unwrap();
        assert_eq!(v.status, Status::Infeasible);
        assert!((v.margin + 1.0).abs() < 1e-6);
        assert!(verify_certificate(&v.certificate.unwrap(), &p).unwrap());
    }

    #[test]
    fn box_binding_infeasibility() {
        // diag(u - 5, 1) is feasible only for u >= 5, outside R = 2
        let p = single_param(
            Mat::from_row_slice(2, 2, &[-5.0, 0.0, 0.0, 1.0]),
            Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            2.0,
        );
        let v = solve(&p, 1e-7).unwrap();
        assert_eq!(v.status, Status::Infeasible);
        assert!((v.margin + 3.0).abs() < 1e-6);
        let cert = v.certificate.unwrap();
        assert!(verify_certificate(&cert, &p).unwrap());
        assert!(cert.box_minus[0] > 0.1);
    }

    #[test]
    fn shape_errors() {
        let mut p = AffineMatrixProblem::new(vec!["a".into()], 1.0).unwrap();
        assert!(p.push_block("F", Mat::identity(2, 2), vec![]).is_err());
        assert!(p.push_block("F", Mat::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]), vec![SparseSym::new()]).is_err());
        assert!(AffineMatrixProblem::new(vec![], 0.0).is_err());
        let mut big = AffineMatrixProblem::new(vec![], 1.0).unwrap();
        big.push_block("F", Mat::identity(10, 10), vec![]).unwrap();
        let cfg = SolverConfig { dim_cap: 5, ..SolverConfig::default() };
        assert!(matches!(solve_with(&big, &cfg), Err(Error::DimensionCap { .. })));
    }
}
