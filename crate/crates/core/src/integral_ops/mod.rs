//! Cauchy transform `T ρ(w) = -(1/π) ∬ ρ(ζ)/(ζ - w) dA`, Beurling transform
//! `Π = ∂_w T`, and the pairing `⟨ν, φ⟩ = -(1/π) ∬ ν φ dA` over a disk.
//!
//! Away from the disk the kernels are smooth and the tensor polar rule is
//! used directly, with extra angular nodes when `w` is close to the circle.
//! Inside, the integral is taken in polar coordinates centred at `w` after
//! subtracting `ρ(w)`, whose transform is known in closed form.

mod density;
mod diskpoly;
mod selftest;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use density::{Density, Term, DEFAULT_POLY_DEGREE};
pub use diskpoly::DiskPoly;
pub use selftest::{probe_points, run_selftest, SelfTestCase};

use crate::error::{Error, Result};
use crate::quadrature::{GaussLegendre, PolarGrid};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Angular nodes never exceed this when refining near the circle.
const MAX_ANGULAR_NODES: usize = 16384;

/// The support disk `D(center, radius)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DiskJson", into = "DiskJson")]
pub struct Disk {
    pub center: Complex64,
    pub radius: f64,
}

#[derive(Serialize, Deserialize)]
struct DiskJson {
    center: [f64; 2],
    radius: f64,
}

impl TryFrom<DiskJson> for Disk {
    type Error = Error;
    fn try_from(j: DiskJson) -> Result<Self> {
        Disk::new(Complex64::new(j.center[0], j.center[1]), j.radius)
    }
}

impl From<Disk> for DiskJson {
    fn from(d: Disk) -> Self {
        Self { center: [d.center.re, d.center.im], radius: d.radius }
    }
}

impl Disk {
    pub fn new(center: Complex64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite() && center.re.is_finite() && center.im.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid disk center {center} radius {radius}")));
        }
        Ok(Self { center, radius })
    }

    /// `u = (ζ - w0)/r`.
    pub fn normalize(&self, z: Complex64) -> Complex64 {
        (z - self.center) / self.radius
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() <= self.radius
    }
}

/// A quadrature value with the change observed under one refinement step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
}

fn gauss_legendre(n: usize) -> Arc<GaussLegendre> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard.entry(n).or_insert_with(|| Arc::new(GaussLegendre::new(n))).clone()
}

fn check_finite(v: Complex64, what: &str) -> Result<Complex64> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::SingularKernel(format!("{what} is not finite on the quadrature grid")))
    }
}

fn pair_on_grid(grid: &PolarGrid, values: &[Complex64], phi: &dyn Fn(Complex64) -> Complex64) -> Result<Complex64> {
    let mut acc = ZERO;
    for ((z, w), v) in grid.nodes.iter().zip(&grid.weights).zip(values) {
        if *v != ZERO {
            acc += v * check_finite(phi(*z), "pairing kernel")? * *w;
        }
    }
    Ok(-acc / PI)
}

/// `⟨ν, φ⟩` by quadrature, with the error estimated from one refinement.
pub fn pairing(nu: &Density, phi: &dyn Fn(Complex64) -> Complex64) -> Result<Estimate> {
    let coarse = pair_on_grid(nu.grid(), nu.values(), phi)?;
    let disk = nu.disk();
    let fine_grid = PolarGrid::new(disk.center, disk.radius, nu.grid().config.refined());
    let fine_vals: Vec<_> = fine_grid.nodes.iter().map(|&z| nu.eval(z)).collect();
    let fine = pair_on_grid(&fine_grid, &fine_vals, phi)?;
    Ok(Estimate { value: fine, error: (fine - coarse).norm() })
}

/// `⟨ν, (ζ - pole)^{-order}⟩` by quadrature; the pole must avoid the closed disk.
pub fn pairing_phi(nu: &Density, order: u32, pole: Complex64) -> Result<Estimate> {
    let disk = nu.disk();
    if (pole - disk.center).norm() <= disk.radius {
        return Err(Error::SingularKernel(format!("kernel pole {pole} lies in the closed support disk")));
    }
    pairing(nu, &|z| (z - pole).powi(-(order as i32)))
}

/// Taylor coefficients in `u` of `(w0 + r u - pole)^{-order}`.
pub fn phi_coeffs(order: u32, pole: Complex64, disk: Disk, degree: usize) -> Result<Vec<Complex64>> {
    let s = disk.center - pole;
    let q = disk.radius / s;
    if !(q.norm() < 1.0) {
        return Err(Error::SingularKernel(format!("kernel pole {pole} lies in the closed support disk")));
    }
    let k = order as f64;
    let mut term = s.powi(-(order as i32));
    let mut out = Vec::with_capacity(degree + 1);
    for m in 0..=degree {
        out.push(term);
        term *= -q * ((k + m as f64) / (m as f64 + 1.0));
    }
    Ok(out)
}

/// Degrees tried when expanding a density into a disk polynomial.
const EXPANSION_DEGREES: [usize; 4] = [DEFAULT_POLY_DEGREE, 48, 96, 160];

/// Disk-polynomial expansion of `rho` whose truncation error is negligible.
pub fn expand(rho: &Density) -> Result<DiskPoly> {
    let mut last = f64::INFINITY;
    for deg in EXPANSION_DEGREES {
        let (p, tail) = rho.to_disk_poly(deg)?;
        let scale = 1.0 + rho.sup_bound();
        if tail <= 1e-15 * scale {
            return Ok(p);
        }
        last = tail;
    }
    Err(Error::Resolution { bound: last, tol: 1e-15 })
}

/// Exact `⟨ν, (ζ - pole)^{-order}⟩` from the monomial moments
/// `∬ u^p ū^q u^m dA = π/(q+1)` when `p + m = q`.
pub fn pairing_closed_form(nu: &Density, order: u32, pole: Complex64) -> Result<Complex64> {
    let disk = nu.disk();
    let p = expand(nu)?;
    let beta = phi_coeffs(order, pole, disk, p.degree())?;
    let mut acc = ZERO;
    for q in 0..=p.degree() {
        for pp in 0..=q.min(p.degree() - q) {
            let a = p.get(pp, q);
            if a != ZERO {
                acc += a * beta[q - pp] / (q + 1) as f64;
            }
        }
    }
    Ok(-acc * disk.radius * disk.radius)
}

/// Angular node count giving near machine accuracy for the smooth kernel at
/// normalized distance `ratio > 1` from the centre.
fn angular_nodes(base: usize, ratio: f64) -> usize {
    let need = (37.0 / ratio.ln()).ceil() as usize;
    need.clamp(base, MAX_ANGULAR_NODES)
}

/// `-(1/π) ∬ ρ(ζ) K(ζ - w) dA` for `w` outside the disk.
fn exterior(rho: &Density, w: Complex64, kernel: impl Fn(Complex64) -> Complex64) -> Complex64 {
    let disk = rho.disk();
    let grid = rho.grid();
    let ratio = (w - disk.center).norm() / disk.radius;
    let n_ang = angular_nodes(grid.config.n_ang, ratio);
    let mut acc = ZERO;
    if n_ang == grid.config.n_ang {
        for ((z, wt), v) in grid.nodes.iter().zip(&grid.weights).zip(rho.values()) {
            acc += v * kernel(z - w) * *wt;
        }
    } else {
        let gl = gauss_legendre(grid.config.n_rad);
        let dtheta = 2.0 * PI / n_ang as f64;
        for (s, ws) in gl.on_interval(0.0, disk.radius) {
            for j in 0..n_ang {
                let z = disk.center + Complex64::from_polar(s, j as f64 * dtheta);
                acc += rho.eval(z) * kernel(z - w) * (ws * s * dtheta);
            }
        }
    }
    -acc / PI
}

/// `-(1/π) ∫∫ (ρ(w + s e^{iθ}) - ρ(w)) e^{-i m θ} s^{1-m} ds dθ` over the part of the
/// disk seen from the interior point `w`, with `m = 1` for `T` and `m = 2` for `Π`.
fn interior_subtracted(rho: &Density, w: Complex64, m: i32) -> Complex64 {
    let disk = rho.disk();
    let cfg = rho.grid().config;
    let gl = gauss_legendre(cfg.n_rad);
    let d = w - disk.center;
    let r2 = disk.radius * disk.radius;
    let rho_w = rho.eval(w);
    let dtheta = 2.0 * PI / cfg.n_ang as f64;
    let mut acc = ZERO;
    for j in 0..cfg.n_ang {
        let e = Complex64::from_polar(1.0, j as f64 * dtheta);
        let b = (d * e.conj()).re;
        let reach = -b + (b * b + r2 - d.norm_sqr()).max(0.0).sqrt();
        let phase = e.conj().powi(m);
        let mut inner = ZERO;
        for (s, ws) in gl.on_interval(0.0, reach) {
            let diff = rho.eval(w + e * s) - rho_w;
            inner += diff * (ws * s.powi(1 - m));
        }
        acc += inner * phase;
    }
    -acc * dtheta / PI
}

/// Cauchy transform of `rho` at any point `w`.
pub fn cauchy_t(rho: &Density, w: Complex64) -> Complex64 {
    if rho.is_zero() {
        return ZERO;
    }
    let disk = rho.disk();
    let d = w - disk.center;
    if d.norm() < disk.radius {
        rho.eval(w) * d.conj() + interior_subtracted(rho, w, 1)
    } else {
        exterior(rho, w, |x| 1.0 / x)
    }
}

/// Beurling transform of `rho` at `w`, a principal value inside the disk.
pub fn beurling_pi(rho: &Density, w: Complex64) -> Complex64 {
    if rho.is_zero() {
        return ZERO;
    }
    let disk = rho.disk();
    if (w - disk.center).norm() < disk.radius {
        // the transform of the indicator vanishes inside
        interior_subtracted(rho, w, 2)
    } else {
        exterior(rho, w, |x| 1.0 / (x * x))
    }
}

/// Leading far-field term `μ(w0) r² / (w - w0)` of the Cauchy transform.
pub fn asymptotic_t(mu: &Density, w: Complex64) -> Result<Complex64> {
    let disk = mu.disk();
    let dist = (w - disk.center).norm();
    if dist <= disk.radius {
        return Err(Error::OutOfRange { z: w, dist, radius: disk.radius });
    }
    Ok(mu.eval(disk.center) * disk.radius * disk.radius / (w - disk.center))
}

/// Cauchy transform from the closed-form monomial formulas.
pub fn closed_form_t(rho: &Density, w: Complex64) -> Result<Complex64> {
    let disk = rho.disk();
    Ok(expand(rho)?.cauchy_unit(disk.normalize(w)) * disk.radius)
}

/// Beurling transform from the closed-form monomial formulas.
pub fn closed_form_pi(rho: &Density, w: Complex64) -> Result<Complex64> {
    let disk = rho.disk();
    Ok(expand(rho)?.beurling_unit(disk.normalize(w)))
}

/// `(∂_w F, ∂_w̄ F)` by central differences with step `h`.
pub fn wirtinger_fd(f: impl Fn(Complex64) -> Complex64, w: Complex64, h: f64) -> (Complex64, Complex64) {
    let i = Complex64::i();
    let dx = (f(w + h) - f(w - h)) / (2.0 * h);
    let dy = (f(w + i * h) - f(w - i * h)) / (2.0 * h);
    ((dx - i * dy) * 0.5, (dx + i * dy) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::QuadratureConfig;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one(disk: Disk) -> Density {
        Density::constant(disk, c(1.0, 0.0), QuadratureConfig::default())
    }

    #[test]
    fn disk_json_round_trip() {
        let d = Disk::new(c(3.0, -1.0), 0.3).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"{"center":[3.0,-1.0],"radius":0.3}"#);
        assert_eq!(serde_json::from_str::<Disk>(&s).unwrap(), d);
        assert!(serde_json::from_str::<Disk>(r#"{"center":[0,0],"radius":-1}"#).is_err());
    }

    #[test]
    fn pairing_of_indicator_with_first_kernel() {
        let disk = Disk::new(c(3.0, 0.0), 1.0).unwrap();
        let e = pairing_phi(&one(disk), 1, ZERO).unwrap();
        assert!((e.value - c(-1.0 / 3.0, 0.0)).norm() < 1e-13);
        assert!(e.error < 1e-13);
        let exact = pairing_closed_form(&one(disk), 1, ZERO).unwrap();
        assert!((exact - c(-1.0 / 3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn pairing_of_zero_density_vanishes() {
        let disk = Disk::new(c(3.0, 0.0), 1.0).unwrap();
        let z = Density::zero(disk, QuadratureConfig::default());
        assert_eq!(pairing_phi(&z, 2, ZERO).unwrap().value, ZERO);
    }

    #[test]
    fn gram_diagonal_entry_is_negative() {
        let disk = Disk::new(c(3.0, 0.0), 0.5).unwrap();
        let nu = Density::conj_phi(disk, c(1.0, 0.0), 1, ZERO, QuadratureConfig::default()).unwrap();
        let q = pairing_phi(&nu, 1, ZERO).unwrap().value;
        let exact = pairing_closed_form(&nu, 1, ZERO).unwrap();
        // -(1/π)∬|ζ|^{-2} dA = -2 ∫_0^r s/(w0² - s²) ds for a disk centred on the real axis
        let oracle = -((9.0f64).ln() - (9.0f64 - 0.25).ln());
        assert!(q.re < 0.0 && q.im.abs() < 1e-14);
        assert!((q - oracle).norm() < 1e-13);
        assert!((exact - oracle).norm() < 1e-14);
    }

    #[test]
    fn singular_kernel_rejected() {
        let disk = Disk::new(c(3.0, 0.0), 1.0).unwrap();
        assert!(matches!(pairing_phi(&one(disk), 1, c(2.5, 0.0)), Err(Error::SingularKernel(_))));
    }

    #[test]
    fn indicator_transform_inside_and_outside() {
        let disk = Disk::new(c(0.5, -0.25), 1.0).unwrap();
        let rho = one(disk);
        for k in 0..40 {
            let t = 0.7 * k as f64;
            let inside = disk.center + Complex64::from_polar(0.9 * (k as f64 / 40.0), t);
            assert!((cauchy_t(&rho, inside) - (inside - disk.center).conj()).norm() < 1e-13);
            let outside = disk.center + Complex64::from_polar(1.02 + 0.1 * k as f64, t);
            assert!((cauchy_t(&rho, outside) - 1.0 / (outside - disk.center)).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_density_on_small_disk_scales_with_r_squared() {
        let disk = Disk::new(c(3.0, 0.0), 0.3).unwrap();
        let k = c(0.02, -0.01);
        let rho = Density::constant(disk, k, QuadratureConfig::default());
        let w = c(1.0, 0.5);
        let want = k * 0.09 / (w - disk.center);
        assert!((cauchy_t(&rho, w) - want).norm() < 1e-15);
        assert!((asymptotic_t(&rho, w).unwrap() - want).norm() < 1e-17);
    }

    #[test]
    fn asymptotic_term_error_shrinks_with_radius() {
        let w = c(0.0, 0.0);
        let mut prev = f64::INFINITY;
        for r in [0.4, 0.2, 0.1, 0.05] {
            let disk = Disk::new(c(2.0, 0.0), r).unwrap();
            let mut p = DiskPoly::zero(1);
            p.set(1, 0, c(1.0, 0.0));
            p.set(0, 0, c(0.3, 0.0));
            let mu = Density::poly(disk, p, QuadratureConfig::default());
            let err = (cauchy_t(&mu, w) - asymptotic_t(&mu, w).unwrap()).norm() / (r * r);
            assert!(err <= prev * 0.5 + 1e-15, "r = {r}: {err} vs {prev}");
            prev = err;
        }
        let disk = Disk::new(c(2.0, 0.0), 0.3).unwrap();
        let mu = one(disk);
        assert!(asymptotic_t(&mu, c(1e9, 0.0)).unwrap().norm() < 1e-9);
        assert!(asymptotic_t(&mu, c(2.1, 0.0)).is_err());
    }

    #[test]
    fn beurling_of_constant_vanishes_inside() {
        let disk = Disk::new(c(3.0, 0.0), 0.5).unwrap();
        let rho = Density::constant(disk, c(0.3, 0.1), QuadratureConfig::default());
        assert_eq!(beurling_pi(&rho, c(3.1, 0.2)), ZERO);
        let z = Density::zero(disk, QuadratureConfig::default());
        assert_eq!(beurling_pi(&z, c(3.1, 0.2)), ZERO);
    }

    fn smooth_densities(disk: Disk) -> Vec<Density> {
        let q = QuadratureConfig::default();
        let mut p = DiskPoly::zero(3);
        p.set(1, 0, c(1.0, 0.5));
        p.set(2, 1, c(-0.3, 0.0));
        p.set(0, 2, c(0.0, 0.2));
        vec![
            Density::poly(disk, p, q),
            Density::conj_phi(disk, c(1.0, 0.0), 2, ZERO, q).unwrap(),
            Density::new(
                disk,
                vec![(c(0.5, 0.0), Term::Indicator), (c(0.0, 1.0), Term::ConjPhi { order: 1, pole: c(0.0, 1.0) })],
                q,
            )
            .unwrap(),
        ]
    }

    #[test]
    fn quadrature_transforms_match_closed_forms() {
        let disk = Disk::new(c(3.0, 0.0), 0.5).unwrap();
        for rho in smooth_densities(disk) {
            for k in 0..12 {
                let t = 0.55 * k as f64;
                for rad in [0.1, 0.5, 0.85, 1.3, 3.0] {
                    let w = disk.center + Complex64::from_polar(rad * disk.radius, t);
                    let scale = 1.0 + rho.sup_bound();
                    assert!((cauchy_t(&rho, w) - closed_form_t(&rho, w).unwrap()).norm() < 1e-11 * scale);
                    assert!((beurling_pi(&rho, w) - closed_form_pi(&rho, w).unwrap()).norm() < 1e-10 * scale);
                }
            }
        }
    }

    #[test]
    fn transform_derivatives_reproduce_density_and_beurling() {
        let disk = Disk::new(c(3.0, 0.0), 0.5).unwrap();
        for rho in smooth_densities(disk) {
            for k in 0..6 {
                let w = disk.center + Complex64::from_polar(0.3 * disk.radius, 1.1 * k as f64);
                let (dw, dwbar) = wirtinger_fd(|z| cauchy_t(&rho, z), w, 1e-4);
                assert!((dwbar - rho.eval(w)).norm() < 1e-5);
                assert!((dw - beurling_pi(&rho, w)).norm() < 1e-5);
            }
        }
    }

    #[test]
    fn transforms_are_linear() {
        let disk = Disk::new(c(3.0, 0.0), 0.5).unwrap();
        let ds = smooth_densities(disk);
        let (a, b) = (c(0.3, -1.0), c(2.0, 0.5));
        let sum = Density::linear_combination(&[(a, &ds[0]), (b, &ds[1])]).unwrap();
        for w in [c(3.1, 0.1), c(4.0, 1.0)] {
            let lhs = cauchy_t(&sum, w);
            let rhs = a * cauchy_t(&ds[0], w) + b * cauchy_t(&ds[1], w);
            assert!((lhs - rhs).norm() < 1e-12);
            let lhs = beurling_pi(&sum, w);
            let rhs = a * beurling_pi(&ds[0], w) + b * beurling_pi(&ds[1], w);
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }
}
