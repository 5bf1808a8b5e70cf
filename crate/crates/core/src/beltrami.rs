//! Beltrami coefficients supported on a disk: the Neumann series
//! `ρ = μ + μΠμ + μΠ(μΠμ) + …` and the map `h(w) = w + Tρ(w)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integral_ops::{cauchy_t, expand, wirtinger_fd, Density, DiskPoly, Disk, Term};

pub const DEFAULT_NEUMANN_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_TERMS: usize = 20;
/// Largest admissible `‖μ‖∞`.
pub const DEFAULT_KAPPA: f64 = 0.5;
/// Degree cap of the disk-polynomial iterates.
const ITERATE_DEGREE: usize = 64;
/// Finite-difference step of the map verification.
pub const VERIFY_STEP: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct NeumannSolution {
    pub rho: Density,
    /// Terms computed, including the final one below tolerance.
    pub terms: usize,
    /// Grid sup of each term.
    pub term_norms: Vec<f64>,
    /// Grid sup of the last term.
    pub residual: f64,
    /// Bound on what polynomial truncation of the iterates dropped.
    pub truncation: f64,
}

/// Sum the Neumann series with the default contraction cap.
pub fn solve_neumann(mu: &Density, tol: f64, max_terms: usize) -> Result<NeumannSolution> {
    solve_neumann_capped(mu, tol, max_terms, DEFAULT_KAPPA)
}

pub fn solve_neumann_capped(mu: &Density, tol: f64, max_terms: usize, kappa: f64) -> Result<NeumannSolution> {
    if !(tol > 0.0) || max_terms == 0 {
        return Err(Error::InvalidInput("Neumann tolerance must be positive and max_terms at least 1".into()));
    }
    let sup = mu.sup_bound();
    if sup >= kappa {
        return Err(Error::NotContractive { sup, cap: kappa });
    }
    if mu.is_zero() {
        return Ok(NeumannSolution { rho: mu.clone(), terms: 1, term_norms: vec![0.0], residual: 0.0, truncation: 0.0 });
    }
    let disk = mu.disk();
    let mu_p = expand(mu)?;
    let nodes: Vec<Complex64> = mu.grid().nodes.iter().map(|&z| disk.normalize(z)).collect();
    let grid_sup = |p: &DiskPoly| nodes.iter().map(|&u| p.eval(u).norm()).fold(0.0, f64::max);

    let mut term_norms = vec![sup];
    let mut term = mu_p.clone();
    let mut acc = DiskPoly::zero(ITERATE_DEGREE);
    let mut truncation = 0.0;
    loop {
        let pi = term.pi_inside();
        if pi.is_zero() {
            term_norms.push(0.0);
            break;
        }
        let (next, tail) = mu_p.mul_with_tail(&pi, ITERATE_DEGREE);
        truncation += tail;
        let norm = grid_sup(&next);
        let prev = *term_norms.last().expect("non-empty");
        term_norms.push(norm);
        acc.add_scaled(&next, Complex64::new(1.0, 0.0));
        if norm < tol {
            break;
        }
        if norm >= prev {
            return Err(Error::Divergence { term: term_norms.len(), norm, prev });
        }
        if term_norms.len() >= max_terms {
            return Err(Error::Divergence { term: term_norms.len(), norm, prev });
        }
        term = next;
    }

    let mut combo = mu.combo().to_vec();
    if !acc.is_zero() {
        combo.push((Complex64::new(1.0, 0.0), Term::Poly(acc)));
    }
    let rho = Density::on_grid(disk, combo, mu.grid_arc())?;
    let residual = *term_norms.last().expect("non-empty");
    Ok(NeumannSolution { rho, terms: term_norms.len(), term_norms, residual, truncation })
}

/// The quasiconformal map `h(w) = w + Tρ(w)`, conformal off the disk and
/// tending to the identity at infinity.
#[derive(Debug, Clone)]
pub struct QcMap {
    pub rho: Density,
    pub disk: Disk,
    pub mu_input: Density,
    pub neumann_terms: usize,
    pub series_residual: f64,
}

impl QcMap {
    pub fn evaluate(&self, w: Complex64) -> Complex64 {
        w + cauchy_t(&self.rho, w)
    }

    pub fn evaluate_many(&self, ws: &[Complex64]) -> Vec<Complex64> {
        ws.par_iter().map(|&w| self.evaluate(w)).collect()
    }

    pub fn identity(mu: &Density) -> Self {
        Self { rho: mu.clone(), disk: mu.disk(), mu_input: mu.clone(), neumann_terms: 0, series_residual: 0.0 }
    }
}

pub fn build_map(mu: &Density) -> Result<QcMap> {
    build_map_with(mu, DEFAULT_NEUMANN_TOL, DEFAULT_MAX_TERMS)
}

pub fn build_map_with(mu: &Density, tol: f64, max_terms: usize) -> Result<QcMap> {
    let sol = solve_neumann(mu, tol, max_terms)?;
    Ok(QcMap {
        rho: sol.rho,
        disk: mu.disk(),
        mu_input: mu.clone(),
        neumann_terms: sol.terms,
        series_residual: sol.residual,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MapVerification {
    /// Max `|μ_h - μ|` over interior probes.
    pub max_mu_deviation: f64,
    /// Max `|∂_w̄ h|` over exterior probes.
    pub max_exterior_defect: f64,
    /// Max `|μ_h|` over interior probes.
    pub mu_sup_estimate: f64,
    /// Probes where `|∂_w h|² - |∂_w̄ h|² <= 0`.
    pub jacobian_failures: Vec<[f64; 2]>,
    pub interior_probes: usize,
    pub exterior_probes: usize,
    pub step: f64,
}

impl MapVerification {
    pub fn homeomorphic(&self) -> bool {
        self.jacobian_failures.is_empty()
    }
}

/// Interior probes on rings well inside the disk and exterior probes on two
/// outer circles.
pub fn default_probes(disk: Disk) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut interior = Vec::new();
    for (i, s) in [0.0, 0.2, 0.45, 0.7].into_iter().enumerate() {
        let count = if i == 0 { 1 } else { 8 };
        for k in 0..count {
            let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.25 * i as f64) / count as f64;
            interior.push(disk.center + Complex64::from_polar(s * disk.radius, t));
        }
    }
    let mut exterior = Vec::new();
    for s in [1.5, 2.5] {
        for k in 0..16 {
            let t = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
            exterior.push(disk.center + Complex64::from_polar(s * disk.radius, t));
        }
    }
    (interior, exterior)
}

/// Finite-difference Beltrami coefficient of `h` against its input, and the
/// conformality defect off the disk.
pub fn verify_map(h: &QcMap, interior: &[Complex64], exterior: &[Complex64], step: f64) -> MapVerification {
    let f = |w: Complex64| h.evaluate(w);
    let inner: Vec<(Complex64, Complex64, Complex64)> = interior
        .par_iter()
        .map(|&w| {
            let (dw, dwbar) = wirtinger_fd(f, w, step);
            (w, dw, dwbar)
        })
        .collect();
    let outer: Vec<(Complex64, Complex64, Complex64)> = exterior
        .par_iter()
        .map(|&w| {
            let (dw, dwbar) = wirtinger_fd(f, w, step);
            (w, dw, dwbar)
        })
        .collect();
    let mut v = MapVerification {
        max_mu_deviation: 0.0,
        max_exterior_defect: 0.0,
        mu_sup_estimate: 0.0,
        jacobian_failures: Vec::new(),
        interior_probes: interior.len(),
        exterior_probes: exterior.len(),
        step,
    };
    for &(w, dw, dwbar) in &inner {
        let mu_h = dwbar / dw;
        v.max_mu_deviation = v.max_mu_deviation.max((mu_h - h.mu_input.eval(w)).norm());
        v.mu_sup_estimate = v.mu_sup_estimate.max(mu_h.norm());
        if dw.norm_sqr() - dwbar.norm_sqr() <= 0.0 {
            v.jacobian_failures.push([w.re, w.im]);
        }
    }
    for &(w, dw, dwbar) in &outer {
        v.max_exterior_defect = v.max_exterior_defect.max(dwbar.norm());
        if dw.norm_sqr() - dwbar.norm_sqr() <= 0.0 {
            v.jacobian_failures.push([w.re, w.im]);
        }
    }
    v
}
