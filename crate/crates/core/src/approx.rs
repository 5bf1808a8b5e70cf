//! Rational approximation by double poles on the unit circle,
//! `r(z) = Σ d_j / (z - e^{iα_j})²`, with the error measured in the weighted
//! sup norm `sup (1 - |z|²)^{p+1} |r(z) - f(z)|`.
//!
//! Poles are placed greedily, then refined by alternating a weighted linear
//! least-squares solve for the weights with a golden-section search on each
//! angle, and finally polished by damped Gauss-Newton on all parameters.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spaces::{bp_norm_fn, BpGrid};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
/// Candidate angles for greedy pole placement.
const GREEDY_ANGLES: usize = 256;
/// Singular-value ratio below which the least-squares system counts as rank deficient.
const RANK_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublePoleRational {
    /// Pole angles; the poles `e^{iα_j}` lie exactly on the unit circle.
    pub angles: Vec<f64>,
    pub weights: Vec<Complex64>,
}

impl DoublePoleRational {
    pub fn n(&self) -> usize {
        self.angles.len()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.angles.iter().map(|&a| Complex64::from_polar(1.0, a)).collect()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.angles
            .iter()
            .zip(&self.weights)
            .map(|(&a, &d)| {
                let e = z - Complex64::from_polar(1.0, a);
                d / (e * e)
            })
            .sum()
    }

    pub fn weight_mass(&self) -> f64 {
        self.weights.iter().map(|d| d.norm()).sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitOptions {
    /// Alternating refinement sweeps.
    pub iters: usize,
    /// Rings of the least-squares grid, clustered towards the boundary.
    pub ls_rings: usize,
    pub ls_angles: usize,
    /// Grid of the reported sup-norm error.
    pub error_grid: BpGrid,
    /// Gauss-Newton polishing steps.
    pub polish_steps: usize,
    /// Starting angles; greedy placement when absent.
    pub init: Option<Vec<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { iters: 6, ls_rings: 40, ls_angles: 256, error_grid: BpGrid::default(), polish_steps: 40, init: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Fit {
    pub rational: DoublePoleRational,
    /// Discrete `B_{p+1}` error on the error grid.
    pub error: f64,
    /// Weighted least-squares residual on the fitting grid.
    pub ls_residual: f64,
    /// True when coincident starting poles had to be separated.
    pub perturbed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub n: usize,
    pub error: f64,
}

/// Weighted samples of the target on the least-squares grid.
struct Problem {
    z: Vec<Complex64>,
    w: Vec<f64>,
    target: Vec<Complex64>,
}

impl Problem {
    fn new<F: Fn(Complex64) -> Complex64 + Sync>(f: &F, p: f64, opts: &FitOptions) -> Result<Self> {
        let m = opts.ls_rings;
        let mut z = Vec::with_capacity(m * opts.ls_angles);
        for i in 0..m {
            let x = (m - i) as f64 / m as f64;
            let r = 1.0 - x * x;
            // the centre ring is a single point
            let count = if i == 0 { 1 } else { opts.ls_angles };
            for j in 0..count {
                z.push(Complex64::from_polar(r, 2.0 * PI * j as f64 / count as f64));
            }
        }
        let w: Vec<f64> = z.iter().map(|z| (1.0 - z.norm_sqr()).powf(p + 1.0)).collect();
        let target: Vec<Complex64> = z.par_iter().zip(&w).map(|(&z, &w)| f(z) * w).collect();
        if target.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidInput("target is not finite on the fitting grid".into()));
        }
        Ok(Self { z, w, target })
    }

    fn basis(&self, angles: &[f64]) -> DMatrix<Complex64> {
        let poles: Vec<Complex64> = angles.iter().map(|&a| Complex64::from_polar(1.0, a)).collect();
        DMatrix::from_fn(self.z.len(), angles.len(), |i, j| {
            let e = self.z[i] - poles[j];
            self.w[i] / (e * e)
        })
    }

    /// Least-squares weights for fixed poles and the residual norm.
    fn solve(&self, angles: &[f64]) -> Result<(Vec<Complex64>, f64)> {
        let a = self.basis(angles);
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smax > 0.0) || smin < RANK_TOL * smax {
            return Err(Error::RankDeficient(format!("double-pole basis at angles {angles:?} (sigma ratio {:e})", smin / smax)));
        }
        let b = DVector::from_column_slice(&self.target);
        let d = svd.solve(&b, 0.0).map_err(|e| Error::RankDeficient(e.to_string()))?;
        let res = (&a * &d - &b).norm();
        Ok((d.iter().copied().collect(), res))
    }

    fn objective(&self, angles: &[f64]) -> f64 {
        self.solve(angles).map(|(_, r)| r).unwrap_or(f64::INFINITY)
    }

    /// Best of [`GREEDY_ANGLES`] equispaced angles for one added pole.
    fn greedy_pole(&self, angles: &[f64]) -> f64 {
        let scores: Vec<(f64, f64)> = (0..GREEDY_ANGLES)
            .into_par_iter()
            .map(|k| {
                let a = 2.0 * PI * k as f64 / GREEDY_ANGLES as f64;
                let mut trial = angles.to_vec();
                trial.push(a);
                (self.objective(&trial), a)
            })
            .collect();
        scores.into_iter().fold((f64::INFINITY, 0.0), |acc, s| if s.0 < acc.0 { s } else { acc }).1
    }

    /// Golden-section minimisation of the residual in one angle.
    fn golden(&self, angles: &mut [f64], j: usize, half_width: f64) {
        const G: f64 = 0.618_033_988_749_894_8;
        let center = angles[j];
        let eval = |x: f64, angles: &mut [f64]| {
            angles[j] = x;
            self.objective(angles)
        };
        let f0 = eval(center, angles);
        let (mut lo, mut hi) = (center - half_width, center + half_width);
        let mut x1 = hi - G * (hi - lo);
        let mut x2 = lo + G * (hi - lo);
        let mut f1 = eval(x1, angles);
        let mut f2 = eval(x2, angles);
        for _ in 0..40 {
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - G * (hi - lo);
                f1 = eval(x1, angles);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + G * (hi - lo);
                f2 = eval(x2, angles);
            }
        }
        let (x, fx) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
        angles[j] = if fx < f0 { x } else { center };
    }

    /// Damped Gauss-Newton on angles and weights jointly.
    fn polish(&self, angles: &mut Vec<f64>, weights: &mut Vec<Complex64>, steps: usize) {
        let n = angles.len();
        let rows = self.z.len();
        let residual = |angles: &[f64], weights: &[Complex64]| -> Vec<Complex64> {
            let poles: Vec<Complex64> = angles.iter().map(|&a| Complex64::from_polar(1.0, a)).collect();
            (0..rows)
                .map(|i| {
                    let r: Complex64 = poles
                        .iter()
                        .zip(weights)
                        .map(|(&a, &d)| {
                            let e = self.z[i] - a;
                            d / (e * e)
                        })
                        .sum();
                    r * self.w[i] - self.target[i]
                })
                .collect()
        };
        let norm = |r: &[Complex64]| r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let mut res = residual(angles, weights);
        let mut cost = norm(&res);
        let mut lambda = 1e-6;
        for _ in 0..steps {
            if cost == 0.0 {
                break;
            }
            // real unknowns: α_j, Re d_j, Im d_j
            let poles: Vec<Complex64> = angles.iter().map(|&a| Complex64::from_polar(1.0, a)).collect();
            let mut jac = DMatrix::<f64>::zeros(2 * rows, 3 * n);
            for i in 0..rows {
                for j in 0..n {
                    let e = self.z[i] - poles[j];
                    let inv2 = self.w[i] / (e * e);
                    let da = 2.0 * Complex64::i() * poles[j] * weights[j] * inv2 / e;
                    let di = Complex64::i() * inv2;
                    for (col, v) in [(j, da), (n + j, inv2), (2 * n + j, di)] {
                        jac[(2 * i, col)] = v.re;
                        jac[(2 * i + 1, col)] = v.im;
                    }
                }
            }
            let rvec = DVector::from_iterator(2 * rows, res.iter().flat_map(|v| [v.re, v.im]));
            let jt = jac.transpose();
            let jtj = &jt * &jac;
            let g = &jt * &rvec;
            let mut accepted = false;
            for _ in 0..12 {
                let mut m = jtj.clone();
                for k in 0..3 * n {
                    m[(k, k)] += lambda * (jtj[(k, k)] + 1e-300);
                }
                let Some(step) = m.lu().solve(&(-&g)) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial_a: Vec<f64> = (0..n).map(|j| angles[j] + step[j]).collect();
                let trial_d: Vec<Complex64> =
                    (0..n).map(|j| weights[j] + Complex64::new(step[n + j], step[2 * n + j])).collect();
                let trial_res = residual(&trial_a, &trial_d);
                let trial_cost = norm(&trial_res);
                if trial_cost < cost {
                    let small = step.amax() < 1e-15 * (1.0 + angles.iter().fold(0.0f64, |m, a| m.max(a.abs())));
                    *angles = trial_a;
                    *weights = trial_d;
                    res = trial_res;
                    cost = trial_cost;
                    lambda = (lambda * 0.1).max(1e-12);
                    accepted = !small;
                    break;
                }
                lambda *= 10.0;
            }
            if !accepted {
                break;
            }
        }
    }
}

fn sup_error<F: Fn(Complex64) -> Complex64 + Sync>(f: &F, r: &DoublePoleRational, p: f64, grid: BpGrid) -> f64 {
    bp_norm_fn(|z| r.eval(z) - f(z), p + 1.0, grid).value
}

/// Separate coincident angles by `π/(8n)`.
fn separate(angles: &[f64]) -> Vec<f64> {
    let n = angles.len();
    let gap = PI / (8.0 * n as f64);
    let mut out: Vec<f64> = Vec::with_capacity(n);
    for &a in angles {
        let mut a = a;
        while out.iter().any(|&b| angle_distance(a, b) < gap) {
            a += gap;
        }
        out.push(a);
    }
    out
}

fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn wrap(a: f64) -> f64 {
    a.rem_euclid(2.0 * PI)
}

/// Fit `n` double poles to `f`, reporting the `B_{p+1}` error of the best
/// iterate.
pub fn fit_double_poles<F>(f: F, n: usize, p: f64, opts: &FitOptions) -> Result<Fit>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    if n == 0 {
        return Err(Error::InvalidInput("need at least one pole".into()));
    }
    if !p.is_finite() || p < 0.0 {
        return Err(Error::InvalidInput(format!("weight exponent must be nonnegative, got {p}")));
    }
    let prob = Problem::new(&f, p, opts)?;
    let mut angles = match &opts.init {
        Some(a) if a.len() == n => a.clone(),
        Some(a) if a.len() < n => {
            let mut a = a.clone();
            while a.len() < n {
                let next = prob.greedy_pole(&a);
                a.push(next);
            }
            a
        }
        Some(a) => return Err(Error::InvalidInput(format!("{} starting angles for {n} poles", a.len()))),
        None => {
            let mut a = Vec::with_capacity(n);
            for _ in 0..n {
                let next = prob.greedy_pole(&a);
                a.push(next);
            }
            a
        }
    };
    let mut perturbed = false;
    let (mut weights, mut ls) = match prob.solve(&angles) {
        Ok(s) => s,
        Err(Error::RankDeficient(_)) => {
            perturbed = true;
            angles = separate(&angles);
            prob.solve(&angles)?
        }
        Err(e) => return Err(e),
    };

    let grid = opts.error_grid;
    let mut best = DoublePoleRational { angles: angles.clone(), weights: weights.clone() };
    let mut best_err = sup_error(&f, &best, p, grid);
    let mut best_ls = ls;
    let mut half_width = PI / (2.0 * n as f64);
    for _ in 0..opts.iters {
        for j in 0..n {
            prob.golden(&mut angles, j, half_width);
        }
        (weights, ls) = prob.solve(&angles)?;
        prob.polish(&mut angles, &mut weights, opts.polish_steps);
        let cand = DoublePoleRational { angles: angles.iter().map(|&a| wrap(a)).collect(), weights: weights.clone() };
        let err = sup_error(&f, &cand, p, grid);
        if err < best_err {
            best = cand;
            best_err = err;
            best_ls = ls;
        }
        half_width *= 0.5;
    }
    Ok(Fit { rational: best, error: best_err, ls_residual: best_ls, perturbed })
}

/// Errors of fits with `1..=n_max` poles, each warm-started from the previous
/// fit plus one greedily placed pole. Non-increasing by construction: a fit
/// that does not improve is replaced by the previous one with a zero-weight
/// extra pole.
pub fn error_curve<F>(f: F, n_max: usize, p: f64, opts: &FitOptions) -> Result<Vec<CurvePoint>>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    Ok(error_curve_fits(f, n_max, p, opts)?.into_iter().map(|(n, fit)| CurvePoint { n, error: fit.error }).collect())
}

/// [`error_curve`] keeping the fits.
pub fn error_curve_fits<F>(f: F, n_max: usize, p: f64, opts: &FitOptions) -> Result<Vec<(usize, Fit)>>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    let mut out: Vec<(usize, Fit)> = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let mut o = opts.clone();
        o.init = out.last().map(|(_, fit)| fit.rational.angles.clone());
        let mut fit = fit_double_poles(&f, n, p, &o)?;
        if let Some((_, prev)) = out.last() {
            if fit.error > prev.error {
                let mut r = prev.rational.clone();
                let extra = fit.rational.angles[n - 1];
                r.angles.push(extra);
                r.weights.push(ZERO);
                fit = Fit { rational: r, error: prev.error, ls_residual: prev.ls_residual, perturbed: fit.perturbed };
            }
            assert!(fit.error <= prev.error, "warm-started error curve must not increase");
        }
        out.push((n, fit));
    }
    Ok(out)
}

/// Schwarzian of the Koebe function, `-6/(1 - z²)²`.
pub fn koebe_schwarzian(z: Complex64) -> Complex64 {
    let q = Complex64::new(1.0, 0.0) - z * z;
    -6.0 / (q * q)
}
