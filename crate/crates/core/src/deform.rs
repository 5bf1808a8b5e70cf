//! Deformations `f -> h∘f` by a quasiconformal map `h` that is conformal on
//! `f(𝔻)`, shifting prescribed Taylor coefficients and the Hilbert norm.
//!
//! The first-order change of the `k`-th coefficient of `h∘f` is `⟨μ, K_k⟩`
//! with the kernel
//!
//! ```text
//! K_k(ζ) = Σ_{m=0..k} [z^k](f - c0)^m (ζ - c0)^{-(m+1)},
//! ```
//!
//! obtained by expanding `1/(ζ - f(z))` around `c0 = f(0)`. The first-order
//! change of `‖h∘f‖²` is `2 Re ⟨μ, K_N⟩` with `K_N = Σ_k w_k conj(c_k) K_k`.
//! The coefficient is sought as `μ = Σ ξ_k conj(K_k) + τ μ0`, where `μ0`
//! is annihilated by the coefficient kernels and has `⟨μ0, K_N⟩ = 1`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beltrami::{build_map_with, default_probes, verify_map, MapVerification, QcMap, DEFAULT_KAPPA, VERIFY_STEP};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::integral_ops::{phi_coeffs, Density, Disk, Term};
use crate::quadrature::QuadratureConfig;
use crate::series::{circle_points, coeffs_from_circle_samples, to_pairs, HoloSeries};
use crate::spaces::{hilbert_norm, membership_tail, SpaceSpec};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Gram matrices with a larger condition number are rejected.
pub const MAX_GRAM_CONDITION: f64 = 1e12;
/// Default bound on the deformation size for which a solve is attempted.
pub const DEFAULT_EPS0: f64 = 1e-2;
pub const DEFAULT_MAX_NEWTON: usize = 30;
/// Kernel terms below this fraction of the largest are dropped.
const KERNEL_TRIM: f64 = 1e-17;
/// Boundary samples used for the image-gap check.
const GAP_SAMPLES: usize = 2048;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeformationProblem {
    pub f: HoloSeries,
    #[serde(default = "SpaceSpec::hardy")]
    pub space: SpaceSpec,
    pub disk: Disk,
    pub j: usize,
    pub n: usize,
    /// Coefficient shifts for `k = j+1..n`.
    #[serde(with = "pairs")]
    pub d: Vec<Complex64>,
    /// Norm shift.
    pub a: f64,
    /// Declared size of the deformation; defaults to `max(|d|, |a|)`.
    #[serde(default)]
    pub eps: Option<f64>,
}

mod pairs {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        crate::series::to_pairs(v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let p: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(crate::series::from_pairs(&p))
    }
}

/// Facts about a problem established before solving.
#[derive(Debug, Clone, Serialize)]
pub struct Hypotheses {
    /// `min |f(z) - w0| - r` over boundary samples.
    pub gap: f64,
    /// Some coefficient above index `n` is nonzero.
    pub polynomial_hypothesis_ok: bool,
    /// Relative weighted tail of `1/(w0 - f)` above the norm truncation's
    /// last quarter, the composition-closure check.
    pub closure_tail: f64,
    pub eps: f64,
}

impl DeformationProblem {
    pub fn eps(&self) -> f64 {
        self.eps.unwrap_or_else(|| self.d.iter().map(|x| x.norm()).fold(self.a.abs(), f64::max))
    }

    pub fn c0(&self) -> Complex64 {
        self.f.coeff(0)
    }

    fn coeff(&self, k: usize) -> Complex64 {
        if k <= self.f.degree() {
            self.f.coeff(k)
        } else {
            ZERO
        }
    }

    /// Check the problem invariants and report the measured quantities.
    pub fn validate(&self) -> Result<Hypotheses> {
        if self.f.is_laurent() || self.f.center() != ZERO {
            return Err(Error::InvalidInput("f must be a Taylor series at 0".into()));
        }
        if self.j > self.n {
            return Err(Error::InvalidInput(format!("need j <= n, got j = {} n = {}", self.j, self.n)));
        }
        if self.d.len() != self.n - self.j {
            return Err(Error::InvalidInput(format!("expected {} coefficient shifts, got {}", self.n - self.j, self.d.len())));
        }
        if self.coeff(self.j).norm() == 0.0 {
            return Err(Error::InvalidInput(format!("coefficient c_{} of f vanishes", self.j)));
        }
        if self.f.degree() > self.space.norm_degree() {
            return Err(Error::InvalidInput("f exceeds the norm truncation of the space".into()));
        }
        if !self.a.is_finite() || self.d.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::InvalidInput("targets must be finite".into()));
        }
        let eps = self.eps();
        let size = self.d.iter().map(|x| x.norm()).fold(self.a.abs(), f64::max);
        if size > eps * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!("targets of size {size} exceed eps = {eps}")));
        }
        let w0 = self.disk.center;
        let boundary: Vec<Complex64> = circle_points(1.0, GAP_SAMPLES).iter().map(|&z| self.f.eval_unchecked(z)).collect();
        let gap = boundary.iter().map(|w| (w - w0).norm()).fold(f64::INFINITY, f64::min) - self.disk.radius;
        if !(gap > 0.0) {
            return Err(Error::InvalidInput(format!("the image of f meets the support disk (gap {gap})")));
        }
        if winding_number(&boundary, w0) != 0 {
            return Err(Error::InvalidInput("the support disk lies inside the image of f".into()));
        }
        let polynomial_hypothesis_ok = self.f.coeffs().iter().skip(self.n + 1).any(|c| c.norm() > 0.0);
        let nd = self.space.norm_degree();
        let g = HoloSeries::constant(ONE, nd).div(&self.f.truncate(nd).scale(-ONE).shift(w0))?;
        let closure_tail = membership_tail(&self.space, &g, 3 * nd / 4)?;
        Ok(Hypotheses { gap, polynomial_hypothesis_ok, closure_tail, eps })
    }
}

fn winding_number(curve: &[Complex64], p: Complex64) -> i64 {
    let mut total = 0.0;
    for i in 0..curve.len() {
        let a = curve[i] - p;
        let b = curve[(i + 1) % curve.len()] - p;
        total += (b / a).arg();
    }
    (total / (2.0 * std::f64::consts::PI)).round() as i64
}

/// A holomorphic kernel `Σ_m κ_m (ζ - c0)^{-(m+1)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub coeffs: Vec<Complex64>,
}

impl Kernel {
    fn trimmed(mut coeffs: Vec<Complex64>, dist: f64) -> Self {
        let mags: Vec<f64> = coeffs.iter().enumerate().map(|(m, c)| c.norm() * dist.powi(-(m as i32 + 1))).collect();
        let top = mags.iter().cloned().fold(0.0, f64::max);
        let keep = mags.iter().rposition(|&v| v > KERNEL_TRIM * top).map_or(0, |i| i + 1);
        coeffs.truncate(keep);
        Self { coeffs }
    }

    pub fn eval(&self, zeta: Complex64, c0: Complex64) -> Complex64 {
        let t = 1.0 / (zeta - c0);
        let mut p = t;
        let mut acc = ZERO;
        for c in &self.coeffs {
            acc += c * p;
            p *= t;
        }
        acc
    }

    /// Terms of `s * conj(K)` as density terms.
    fn conj_terms(&self, s: Complex64, c0: Complex64) -> Vec<(Complex64, Term)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != ZERO)
            .map(|(m, c)| (s * c.conj(), Term::ConjPhi { order: m as u32 + 1, pole: c0 }))
            .collect()
    }

    /// Taylor coefficients in `u = (ζ - w0)/r` through `degree`.
    fn expansion(&self, c0: Complex64, disk: Disk, degree: usize) -> Result<Vec<Complex64>> {
        let mut out = vec![ZERO; degree + 1];
        for (m, c) in self.coeffs.iter().enumerate() {
            if *c == ZERO {
                continue;
            }
            for (o, b) in out.iter_mut().zip(phi_coeffs(m as u32 + 1, c0, disk, degree)?) {
                *o += c * b;
            }
        }
        Ok(out)
    }
}

/// The coefficient kernels `K_{j+1..n}` and the norm kernel `K_N`.
#[derive(Debug, Clone)]
pub struct Kernels {
    pub c0: Complex64,
    pub coeff: Vec<Kernel>,
    pub norm: Kernel,
    /// Expansion degree in `u` used for exact pairings.
    pub degree: usize,
}

fn convolve(a: &[Complex64], b: &[Complex64], len: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; len];
    for (i, &x) in a.iter().enumerate().take(len) {
        if x == ZERO {
            continue;
        }
        for (k, &y) in b.iter().enumerate().take(len - i) {
            out[i + k] += x * y;
        }
    }
    out
}

pub fn build_kernels(problem: &DeformationProblem) -> Result<Kernels> {
    let c0 = problem.c0();
    let disk = problem.disk;
    let dist = (disk.center - c0).norm() - disk.radius;
    if !(dist > 0.0) {
        return Err(Error::SingularKernel(format!("f(0) = {c0} lies in the closed support disk")));
    }
    let top = problem.f.degree().max(problem.n);
    let mut g: Vec<Complex64> = (0..=top).map(|k| problem.coeff(k)).collect();
    g[0] = ZERO;
    // powers[m][k] = [z^k](f - c0)^m
    let mut powers = vec![vec![ZERO; top + 1]];
    powers[0][0] = ONE;
    for m in 1..=top {
        let next = convolve(&powers[m - 1], &g, top + 1);
        powers.push(next);
    }
    let coeff = (problem.j + 1..=problem.n)
        .map(|k| Kernel::trimmed((0..=k).map(|m| powers[m][k]).collect(), dist))
        .collect();
    let weights = problem.space.weights();
    let mut norm = vec![ZERO; top + 1];
    for (k, ck) in (0..=problem.f.degree()).map(|k| (k, problem.coeff(k))) {
        if ck == ZERO {
            continue;
        }
        let s = ck.conj() * weights[k];
        for (m, nm) in norm.iter_mut().enumerate().take(k + 1) {
            *nm += s * powers[m][k];
        }
    }
    let norm = Kernel::trimmed(norm, dist);
    let orders = norm.coeffs.len().max(problem.n + 1);
    let q = disk.radius / (disk.center - c0).norm();
    // terms binom(k+i-1, i) q^i of the highest order fall below 1e-18
    let mut degree = 16;
    loop {
        let i = degree as f64;
        let k = orders as f64;
        let log_term = ln_binom(k + i - 1.0, i) + i * q.ln();
        if log_term < (1e-18f64).ln() || degree >= 1024 {
            break;
        }
        degree *= 2;
    }
    Ok(Kernels { c0, coeff, norm, degree })
}

fn ln_binom(n: f64, k: f64) -> f64 {
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

fn ln_gamma(x: f64) -> f64 {
    // Stirling series, adequate for x >= 1 after shifting.
    let mut x = x;
    let mut acc = 0.0;
    while x < 8.0 {
        acc -= x.ln();
        x += 1.0;
    }
    acc + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x) - 1.0 / (360.0 * x.powi(3))
}

/// `G_{ab} = ⟨conj(B_b), B_a⟩` over the basis kernels, exact from the
/// `u`-expansions: `-r² Σ_i conj(β^b_i) β^a_i / (i+1)`.
fn gram(basis: &[&Kernel], c0: Complex64, disk: Disk, degree: usize) -> Result<DMatrix<Complex64>> {
    let exps: Vec<Vec<Complex64>> = basis.iter().map(|k| k.expansion(c0, disk, degree)).collect::<Result<_>>()?;
    let r2 = disk.radius * disk.radius;
    Ok(DMatrix::from_fn(basis.len(), basis.len(), |a, b| {
        -exps[a].iter().zip(&exps[b]).enumerate().map(|(i, (x, y))| y.conj() * x / (i + 1) as f64).sum::<Complex64>() * r2
    }))
}

fn condition_number(g: &DMatrix<Complex64>) -> f64 {
    let sv = g.clone().svd(false, false).singular_values;
    let (mx, mn) = (sv.max(), sv.min());
    if mn == 0.0 {
        f64::INFINITY
    } else {
        mx / mn
    }
}

/// `μ0 = Σ c_b conj(B_b)` over `B = (K_{j+1..n}, K_N)`.
#[derive(Debug, Clone)]
pub struct Mu0 {
    pub coeffs: Vec<Complex64>,
    pub density: Density,
    pub condition: f64,
    pub sup: f64,
}

pub fn build_mu0(problem: &DeformationProblem, kernels: &Kernels, quad: QuadratureConfig) -> Result<Mu0> {
    let mut basis: Vec<&Kernel> = kernels.coeff.iter().collect();
    basis.push(&kernels.norm);
    let g = gram(&basis, kernels.c0, problem.disk, kernels.degree)?;
    let condition = condition_number(&g);
    if !(condition <= MAX_GRAM_CONDITION) {
        return Err(Error::IllConditioned(condition));
    }
    let mut rhs = DVector::from_element(basis.len(), ZERO);
    rhs[basis.len() - 1] = ONE;
    let c = g.clone().lu().solve(&rhs).ok_or(Error::IllConditioned(f64::INFINITY))?;
    let coeffs: Vec<Complex64> = c.iter().cloned().collect();
    let mut terms = Vec::new();
    for (k, s) in basis.iter().zip(&coeffs) {
        terms.extend(k.conj_terms(*s, kernels.c0));
    }
    let density = Density::new(problem.disk, merge(terms), quad)?;
    let sup = density.sup_bound();
    Ok(Mu0 { coeffs, density, condition, sup })
}

fn merge(terms: Vec<(Complex64, Term)>) -> Vec<(Complex64, Term)> {
    let mut out: Vec<(Complex64, Term)> = Vec::new();
    for (c, t) in terms {
        match out.iter_mut().find(|(_, u)| *u == t) {
            Some(slot) => slot.0 += c,
            None => out.push((c, t)),
        }
    }
    out
}

/// Exact `⟨conj(K_l), K_k⟩` over the coefficient kernels and the row
/// `⟨conj(K_l), K_N⟩`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub gram: DMatrix<Complex64>,
    pub norm_row: Vec<Complex64>,
}

pub fn linear_system(problem: &DeformationProblem, kernels: &Kernels) -> Result<LinearSystem> {
    let mut basis: Vec<&Kernel> = kernels.coeff.iter().collect();
    basis.push(&kernels.norm);
    let full = gram(&basis, kernels.c0, problem.disk, kernels.degree)?;
    let t = kernels.coeff.len();
    let gram = full.view((0, 0), (t, t)).into_owned();
    let norm_row = (0..t).map(|l| full[(t, l)]).collect();
    Ok(LinearSystem { gram, norm_row })
}

/// First-order solution: `Σ_l ξ_l ⟨conj K_l, K_k⟩ = d_k` and
/// `τ = a ‖f‖ - Re Σ_l ξ_l ⟨conj K_l, K_N⟩`.
pub fn linearized_init(problem: &DeformationProblem, sys: &LinearSystem, f_norm: f64) -> Result<(Vec<Complex64>, f64)> {
    let t = sys.gram.nrows();
    let xi: Vec<Complex64> = if t == 0 {
        Vec::new()
    } else {
        let rhs = DVector::from_column_slice(&problem.d);
        let sol = sys.gram.clone().lu().solve(&rhs).ok_or(Error::IllConditioned(f64::INFINITY))?;
        sol.iter().cloned().collect()
    };
    let cross: Complex64 = xi.iter().zip(&sys.norm_row).map(|(x, g)| x * g).sum();
    let tau = problem.a * f_norm - cross.re;
    Ok((xi, tau))
}

/// Norm of a composition recovered from samples on a circle.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CompositionNorm {
    pub norm: f64,
    pub alias_bound: f64,
    /// Highest coefficient index above the sampling noise floor.
    pub resolved_degree: usize,
}

/// Samples `g` on `|z| = rho` at `m` points and recovers its coefficients.
/// Coefficients below the roundoff floor `64 ε max|g| / rho^k` are zeroed.
pub fn recover_composition(g: &[Complex64], rho: f64, degree: usize) -> Result<(HoloSeries, f64, usize)> {
    let rec = coeffs_from_circle_samples(g, rho, degree)?;
    let peak = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut coeffs = rec.series.coeffs().to_vec();
    let mut resolved = 0;
    for (k, c) in coeffs.iter_mut().enumerate() {
        let floor = 64.0 * f64::EPSILON * peak / rho.powi(k as i32);
        if c.norm() < floor {
            *c = ZERO;
        } else {
            resolved = k;
        }
    }
    Ok((HoloSeries::new(coeffs, rho)?, rec.alias_bound, resolved))
}

/// `‖map∘f‖_H` from `m` samples on `|z| = rho`.
pub fn hnorm_of_map<F>(space: &SpaceSpec, f: &HoloSeries, map: F, rho: f64, m: usize) -> Result<CompositionNorm>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    let pts = circle_points(rho, m);
    let vals: Vec<Complex64> = pts.par_iter().map(|&z| map(f.eval_unchecked(z))).collect();
    let degree = space.norm_degree().min(m / 4);
    let (series, alias_bound, resolved_degree) = recover_composition(&vals, rho, degree)?;
    Ok(CompositionNorm { norm: hilbert_norm(space, &series)?, alias_bound, resolved_degree })
}

pub fn hnorm_of_composition(space: &SpaceSpec, f: &HoloSeries, h: &QcMap, rho: f64, m: usize) -> Result<CompositionNorm> {
    hnorm_of_map(space, f, |w| h.evaluate(w), rho, m)
}

/// Solver settings, normally taken from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct DeformOptions {
    pub quadrature: QuadratureConfig,
    pub rho: f64,
    pub samples: usize,
    pub coeff_tol: f64,
    pub norm_tol: f64,
    pub neumann_tol: f64,
    pub max_iter: usize,
    pub kappa: f64,
    pub eps0: f64,
}

impl DeformOptions {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            quadrature: cfg.quadrature,
            rho: cfg.sampling.rho,
            samples: cfg.norm_samples(),
            coeff_tol: cfg.tolerances.coeff,
            norm_tol: cfg.tolerances.norm,
            neumann_tol: cfg.tolerances.neumann,
            max_iter: DEFAULT_MAX_NEWTON,
            kappa: DEFAULT_KAPPA,
            eps0: DEFAULT_EPS0,
        }
    }
}

impl Default for DeformOptions {
    fn default() -> Self {
        Self::from_config(&RunConfig::default())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DeformationReport {
    /// `|coef_k(h∘f) - (c_k + d_k)|` for `k = j+1..n`.
    pub coeff_residuals: Vec<f64>,
    /// `‖h∘f‖ - (‖f‖ + a)`.
    pub norm_residual: f64,
    pub f_norm: f64,
    pub hf_norm: f64,
    pub mu_sup: f64,
    pub mu0_sup: f64,
    pub eps: f64,
    /// `‖μ‖∞ / ε`.
    pub m_est: f64,
    pub iterations: usize,
    pub residual_trace: Vec<f64>,
    /// `|coef_k(h∘f) - c_k|` for `k = 0..=j`, the untargeted coefficients.
    pub low_order_shift: Vec<f64>,
    pub alias_bound: f64,
    pub gram_condition: f64,
    pub hypotheses: Hypotheses,
    pub verification: MapVerification,
}

#[derive(Debug, Clone)]
pub struct DeformationResult {
    pub xi: Vec<Complex64>,
    pub tau: f64,
    pub mu: Density,
    pub map: QcMap,
    pub report: DeformationReport,
}

/// Serializable view of a result.
#[derive(Debug, Clone, Serialize)]
pub struct DeformationSummary {
    pub xi: Vec<[f64; 2]>,
    pub tau: f64,
    pub report: DeformationReport,
}

impl DeformationResult {
    pub fn summary(&self) -> DeformationSummary {
        DeformationSummary { xi: to_pairs(&self.xi), tau: self.tau, report: self.report.clone() }
    }
}

struct Engine<'a> {
    problem: &'a DeformationProblem,
    opts: &'a DeformOptions,
    kernels: Kernels,
    mu0: Mu0,
    f_norm: f64,
    points: Vec<Complex64>,
    f_vals: Vec<Complex64>,
}

struct Evaluation {
    mu: Density,
    map: QcMap,
    coeffs: HoloSeries,
    hf_norm: f64,
    alias_bound: f64,
    /// Real residual vector `(Re r_k, Im r_k, r_N)`.
    residual: Vec<f64>,
}

impl<'a> Engine<'a> {
    fn unknowns(&self) -> usize {
        2 * self.kernels.coeff.len() + 1
    }

    fn pack(xi: &[Complex64], tau: f64) -> Vec<f64> {
        let mut x: Vec<f64> = xi.iter().flat_map(|c| [c.re, c.im]).collect();
        x.push(tau);
        x
    }

    fn unpack(x: &[f64]) -> (Vec<Complex64>, f64) {
        let t = (x.len() - 1) / 2;
        ((0..t).map(|i| Complex64::new(x[2 * i], x[2 * i + 1])).collect(), x[2 * t])
    }

    fn mu(&self, x: &[f64]) -> Result<Density> {
        let (xi, tau) = Self::unpack(x);
        let c0 = self.kernels.c0;
        let mut terms = Vec::new();
        for (k, s) in self.kernels.coeff.iter().zip(&xi) {
            terms.extend(k.conj_terms(*s, c0));
        }
        for (c, t) in self.mu0.density.combo() {
            terms.push((c * tau, t.clone()));
        }
        Density::new(self.problem.disk, merge(terms), self.opts.quadrature)
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        let mu = self.mu(x)?;
        let map = build_map_with(&mu, self.opts.neumann_tol, crate::beltrami::DEFAULT_MAX_TERMS)?;
        let vals: Vec<Complex64> = self.f_vals.par_iter().map(|&w| map.evaluate(w)).collect();
        let degree = self.problem.space.norm_degree().min(self.points.len() / 4);
        let (coeffs, alias_bound, _) = recover_composition(&vals, self.opts.rho, degree)?;
        let hf_norm = hilbert_norm(&self.problem.space, &coeffs)?;
        let mut residual = Vec::with_capacity(self.unknowns());
        for (i, k) in (self.problem.j + 1..=self.problem.n).enumerate() {
            let r = coeffs.coeff(k) - (self.problem.coeff(k) + self.problem.d[i]);
            residual.push(r.re);
            residual.push(r.im);
        }
        residual.push(hf_norm - (self.f_norm + self.problem.a));
        Ok(Evaluation { mu, map, coeffs, hf_norm, alias_bound, residual })
    }

    fn scaled(&self, r: &[f64]) -> Vec<f64> {
        let last = r.len() - 1;
        r.iter()
            .enumerate()
            .map(|(i, v)| if i == last { v / self.opts.norm_tol } else { v / self.opts.coeff_tol })
            .collect()
    }

    fn converged(&self, r: &[f64]) -> bool {
        self.scaled(r).iter().all(|v| v.abs() < 1.0) && self.coeff_residuals(r).iter().all(|v| *v < self.opts.coeff_tol)
    }

    fn coeff_residuals(&self, r: &[f64]) -> Vec<f64> {
        r[..r.len() - 1].chunks(2).map(|p| p[0].hypot(p[1])).collect()
    }

    fn merit(&self, r: &[f64]) -> f64 {
        self.scaled(r).iter().map(|v| v * v).sum()
    }

    fn jacobian(&self, x: &[f64], r0: &[f64]) -> Result<DMatrix<f64>> {
        let n = x.len();
        let cols: Vec<Result<Vec<f64>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let step = 1e-7 * x[i].abs().max(1e-3);
                let mut xp = x.to_vec();
                xp[i] += step;
                let e = self.evaluate(&xp)?;
                Ok(e.residual.iter().zip(r0).map(|(a, b)| (a - b) / step).collect())
            })
            .collect();
        let mut j = DMatrix::zeros(r0.len(), n);
        for (i, col) in cols.into_iter().enumerate() {
            for (row, v) in col?.into_iter().enumerate() {
                j[(row, i)] = v;
            }
        }
        Ok(j)
    }
}

/// Damped Newton on the real-ified system; residuals come from the exactly
/// constructed map, not from the first-order model.
pub fn solve_deformation(problem: &DeformationProblem, opts: &DeformOptions) -> Result<DeformationResult> {
    let hypotheses = problem.validate()?;
    if hypotheses.eps > opts.eps0 * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!("eps = {} exceeds eps0 = {}", hypotheses.eps, opts.eps0)));
    }
    if !opts.samples.is_power_of_two() || opts.samples < 4 * problem.n.max(1) {
        return Err(Error::InvalidInput("sample count must be a power of two and at least 4n".into()));
    }
    let kernels = build_kernels(problem)?;
    let mu0 = build_mu0(problem, &kernels, opts.quadrature)?;
    let sys = linear_system(problem, &kernels)?;
    let f_norm = hilbert_norm(&problem.space, &problem.f)?;
    let points = circle_points(opts.rho, opts.samples);
    let f_vals = points.iter().map(|&z| problem.f.eval_unchecked(z)).collect();
    let engine = Engine { problem, opts, kernels, mu0, f_norm, points, f_vals };

    let (xi0, tau0) = linearized_init(problem, &sys, f_norm)?;
    let mut x = Engine::pack(&xi0, tau0);
    // pull the start inside the admissible ball
    let mut shrink = 0;
    while engine.mu(&x)?.sup_bound() >= opts.kappa {
        x.iter_mut().for_each(|v| *v *= 0.5);
        shrink += 1;
        if shrink > 60 {
            return Err(Error::NonConvergence { iterations: 0, trace: Vec::new() });
        }
    }

    let mut trace = Vec::new();
    let mut current = engine.evaluate(&x)?;
    let mut iterations = 0;
    loop {
        let max_r = current.residual.iter().map(|v| v.abs()).fold(0.0, f64::max);
        trace.push(max_r);
        if engine.converged(&current.residual) {
            break;
        }
        if iterations >= opts.max_iter {
            return Err(Error::NonConvergence { iterations, trace });
        }
        iterations += 1;
        let jac = engine.jacobian(&x, &current.residual)?;
        let rhs = DVector::from_iterator(current.residual.len(), current.residual.iter().map(|v| -v));
        let svd = jac.svd(true, true);
        let tol = svd.singular_values.max() * 1e-14;
        let dx = svd.solve(&rhs, tol).map_err(|e| Error::RankDeficient(e.to_string()))?;
        let base = engine.merit(&current.residual);
        let mut t = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, b)| a + t * b).collect();
            let mu = engine.mu(&trial)?;
            if mu.sup_bound() < opts.kappa {
                let e = engine.evaluate(&trial)?;
                if engine.merit(&e.residual) < base {
                    break Some((trial, e));
                }
            }
            t *= 0.5;
            if t < 1e-6 {
                break None;
            }
        };
        match accepted {
            Some((trial, e)) => {
                x = trial;
                current = e;
            }
            None => return Err(Error::NonConvergence { iterations, trace }),
        }
    }

    let (xi, tau) = Engine::unpack(&x);
    let r = &current.residual;
    let coeff_residuals = engine.coeff_residuals(r);
    let mu_sup = current.mu.sup_bound();
    let eps = hypotheses.eps;
    let low_order_shift = (0..=problem.j).map(|k| (current.coeffs.coeff(k) - problem.coeff(k)).norm()).collect();
    let (mut inner, mut outer) = default_probes(problem.disk);
    let bd: Vec<Complex64> = circle_points(1.0, 64).iter().map(|&z| problem.f.eval_unchecked(z)).collect();
    outer.extend(bd);
    inner.retain(|w| problem.disk.contains(*w));
    let verification = verify_map(&current.map, &inner, &outer, VERIFY_STEP);
    let report = DeformationReport {
        coeff_residuals,
        norm_residual: r[r.len() - 1],
        f_norm,
        hf_norm: current.hf_norm,
        mu_sup,
        mu0_sup: engine.mu0.sup,
        eps,
        m_est: if eps > 0.0 { mu_sup / eps } else { 0.0 },
        iterations,
        residual_trace: trace,
        low_order_shift,
        alias_bound: current.alias_bound,
        gram_condition: engine.mu0.condition,
        hypotheses,
        verification,
    };
    Ok(DeformationResult { xi, tau, mu: current.mu, map: current.map, report })
}

/// Largest `eps` (as a fraction of the problem's targets) for which the
/// solver succeeds, by bisection on the scale of `(d, a)`.
pub fn estimate_eps0(problem: &DeformationProblem, opts: &DeformOptions, steps: usize) -> f64 {
    let scaled = |s: f64| {
        let mut p = problem.clone();
        p.d.iter_mut().for_each(|v| *v *= s);
        p.a *= s;
        p.eps = Some(problem.eps() * s);
        p
    };
    let mut o = opts.clone();
    o.eps0 = f64::INFINITY;
    let ok = |s: f64| solve_deformation(&scaled(s), &o).is_ok();
    if ok(1.0) {
        return problem.eps();
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo * problem.eps()
}
