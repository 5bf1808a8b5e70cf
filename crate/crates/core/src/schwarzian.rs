//! Schwarzian derivatives, solutions of `S_w = f` by the linear equation
//! `η'' + (f/2) η = 0`, inversion `F(z) = 1/w(1/z)`, and the covering radius.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::{circle_points, HoloSeries};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `S_w = (w''/w')' - (w''/w')²/2`, of degree `N - 3`.
pub fn schwarzian_of(w: &HoloSeries) -> Result<HoloSeries> {
    if w.is_laurent() {
        return Err(Error::InvalidInput("Schwarzian of a Laurent series".into()));
    }
    let n = w.degree();
    if n < 3 {
        return Err(Error::InvalidInput("need a series of degree at least 3".into()));
    }
    let d1 = w.derivative();
    let a1 = d1.coeff(0).norm();
    if a1 == 0.0 {
        return Err(Error::NotLocallyUnivalent(a1));
    }
    let d2 = d1.derivative();
    let q = d2.div(&d1.truncate(n - 2))?;
    let s = q.derivative().sub(&q.mul(&q)?.scale(Complex64::new(0.5, 0.0)).truncate(n - 3))?;
    Ok(s.truncate(n - 3))
}

#[derive(Debug, Clone, Serialize)]
pub struct SchwarzSolution {
    pub w: HoloSeries,
    pub eta1: HoloSeries,
    pub eta2: HoloSeries,
    /// `(w(0), w'(0), w''(0))`.
    pub init: [[f64; 2]; 3],
    /// Radius of the first zero of `η2 - β η1`, a pole of `w`; `w` is locally
    /// univalent inside it.
    pub validity_radius: f64,
}

impl SchwarzSolution {
    pub fn warning(&self) -> Option<String> {
        (self.validity_radius <= 1.0)
            .then(|| format!("solution has a pole at radius {:.6} inside the closed unit disk", self.validity_radius))
    }
}

/// Power-series solutions of `η'' + (f/2) η = 0` with `η1 = z + …`,
/// `η2 = 1 + …`, through the degree of `f`.
pub fn linear_solutions(f: &HoloSeries) -> (HoloSeries, HoloSeries) {
    let n = f.degree();
    let fc = f.coeffs();
    let solve = |e0: Complex64, e1: Complex64| {
        let mut e = vec![ZERO; n + 1];
        e[0] = e0;
        if n >= 1 {
            e[1] = e1;
        }
        for m in 0..n.saturating_sub(1) {
            let acc: Complex64 = (0..=m).map(|k| fc[k] * e[m - k]).sum();
            e[m + 2] = -acc / (2.0 * ((m + 2) * (m + 1)) as f64);
        }
        HoloSeries::new(e, f.radius()).expect("finite recursion")
    };
    (solve(ZERO, ONE), solve(ONE, ZERO))
}

/// `w` with `S_w = f` and the prescribed `w(0), w'(0), w''(0)`, as
/// `a0 + a1 η1/(η2 - β η1)` with `β = a2/(2 a1)`.
pub fn solve_schwarz(f: &HoloSeries, init: (Complex64, Complex64, Complex64)) -> Result<SchwarzSolution> {
    solve_schwarz_within(f, init, 4.0)
}

/// [`solve_schwarz`] searching for the first pole only below `limit`; the
/// reported radius is capped there.
pub fn solve_schwarz_within(f: &HoloSeries, init: (Complex64, Complex64, Complex64), limit: f64) -> Result<SchwarzSolution> {
    let (a0, a1, a2) = init;
    if a1.norm() == 0.0 {
        return Err(Error::NotLocallyUnivalent(0.0));
    }
    if f.is_laurent() {
        return Err(Error::InvalidInput("the Schwarzian must be a Taylor series".into()));
    }
    let (eta1, eta2) = linear_solutions(f);
    let beta = a2 / (2.0 * a1);
    let den = eta2.sub(&eta1.scale(beta))?;
    let w = eta1.scale(a1).div(&den)?.shift(a0);
    let validity_radius = first_zero_radius(&den, f.radius().min(limit));
    let pair = |c: Complex64| [c.re, c.im];
    Ok(SchwarzSolution { w, eta1, eta2, init: [pair(a0), pair(a1), pair(a2)], validity_radius })
}

fn winding(g: &HoloSeries, rho: f64, m: usize) -> i64 {
    let vals: Vec<Complex64> = circle_points(rho, m).iter().map(|&z| g.eval_unchecked(z)).collect();
    let total: f64 = (0..m).map(|i| (vals[(i + 1) % m] / vals[i]).arg()).sum();
    (total / (2.0 * PI)).round() as i64
}

/// Smallest radius below `limit` at which `g` has a zero, by the argument
/// principle on circles; `limit` if there is none.
fn first_zero_radius(g: &HoloSeries, limit: f64) -> f64 {
    const STEPS: usize = 200;
    const M: usize = 512;
    // a polynomial with no zero inside the largest circle needs no scan
    if winding(g, limit, M) == 0 {
        return limit;
    }
    let mut prev = 0.0;
    for i in 1..=STEPS {
        let rho = limit * i as f64 / STEPS as f64;
        if winding(g, rho, M) != 0 {
            let (mut lo, mut hi) = (prev, rho);
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if mid > 0.0 && winding(g, mid, M) != 0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return hi;
        }
        prev = rho;
    }
    limit
}

fn check_normalized(w: &HoloSeries) -> Result<Complex64> {
    if w.is_laurent() || w.degree() < 1 {
        return Err(Error::InvalidInput("need a Taylor series of degree at least 1".into()));
    }
    if w.coeff(0).norm() > 1e-12 {
        return Err(Error::InvalidInput("need w(0) = 0".into()));
    }
    let a1 = w.coeff(1);
    if (a1.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("need |w'(0)| = 1, got {}", a1.norm())));
    }
    Ok(a1)
}

/// `F(z) = 1/w(1/z) = e^{-iθ} z + b0 + b1/z + …` for `w = e^{iθ} z + a2 z² + …`,
/// returned as a series in `t = 1/z`: head `e^{-iθ}` (the `t^{-1}` term) and
/// coefficients `b0, b1, …`.
pub fn invert_expansion(w: &HoloSeries) -> Result<HoloSeries> {
    let a1 = check_normalized(w)?;
    let n = w.degree();
    // w = a1 t g(t), 1/g = Σ e_k t^k, F = (1/a1)(e_0/t + e_1 + e_2 t + …)
    let g: Vec<Complex64> = (1..=n).map(|k| w.coeff(k) / a1).collect();
    let g = HoloSeries::new(g, f64::INFINITY)?;
    let e = g.recip()?;
    let b: Vec<Complex64> = e.coeffs().iter().skip(1).map(|c| c / a1).collect();
    let b = if b.is_empty() { vec![ZERO] } else { b };
    Ok(HoloSeries::new(b, f64::INFINITY)?.with_head(ONE / a1))
}

/// Leading monomials of `a_n` in `b0, b1`: the `b0^{n-1}` coefficient is
/// `(-1)^{n-1} e^{inθ}` and the `b1 b0^{n-3}` coefficient is
/// `(-1)^n (n-2) e^{i(n-1)θ}`.
#[derive(Debug, Clone, Serialize)]
pub struct LeadingTerms {
    pub n: usize,
    pub b0_power: [f64; 2],
    pub b0_power_expected: [f64; 2],
    pub b1_term: [f64; 2],
    pub b1_term_expected: [f64; 2],
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AFromB {
    /// `a_1 = e^{iθ}, a_2, …`; index 0 holds `a_0 = 0`.
    pub a: HoloSeries,
    pub leading: Vec<LeadingTerms>,
}

/// `a_n = e^{iθ} [t^{n-1}] 1/(1 + e^{iθ}(b0 t + b1 t² + …))`.
fn a_from_b(b: &[Complex64], theta: f64, degree: usize) -> Result<HoloSeries> {
    let e1 = Complex64::from_polar(1.0, theta);
    let mut den = vec![ZERO; degree.max(1)];
    den[0] = ONE;
    for (k, bk) in b.iter().enumerate().take(degree.saturating_sub(1)) {
        den[k + 1] = e1 * bk;
    }
    let g = HoloSeries::new(den, f64::INFINITY)?.recip()?;
    let mut a = vec![ZERO; degree + 1];
    for (k, gk) in g.coeffs().iter().enumerate().take(degree) {
        a[k + 1] = e1 * gk;
    }
    HoloSeries::new(a, f64::INFINITY)
}

/// Taylor coefficients `a_1..a_degree` of `w` from the inverted coefficients
/// `b0, b1, …`, with the leading monomials cross-checked for `3 <= n <= degree`.
pub fn a_from_b_recursion(b: &[Complex64], theta: f64, degree: usize) -> Result<AFromB> {
    if degree < 1 {
        return Err(Error::InvalidInput("degree must be at least 1".into()));
    }
    let a = a_from_b(b, theta, degree)?;
    let beta = Complex64::new(0.6, 0.3);
    let h = 1e-4;
    let at = |t: Complex64| a_from_b(&[beta, t], theta, degree);
    let (p0, pp, pm) = (at(ZERO)?, at(Complex64::new(h, 0.0))?, at(Complex64::new(-h, 0.0))?);
    let pair = |c: Complex64| [c.re, c.im];
    let leading = (3..=degree)
        .map(|n| {
            let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
            let b0_expected = Complex64::from_polar(sign, n as f64 * theta);
            let b0_measured = p0.coeff(n) / beta.powu(n as u32 - 1);
            let b1_expected = Complex64::from_polar(-sign * (n - 2) as f64, (n - 1) as f64 * theta);
            let b1_measured = (pp.coeff(n) - pm.coeff(n)) / (2.0 * h) / beta.powu(n as u32 - 3);
            let error = (b0_measured - b0_expected).norm().max((b1_measured - b1_expected).norm() / (n as f64));
            LeadingTerms {
                n,
                b0_power: pair(b0_measured),
                b0_power_expected: pair(b0_expected),
                b1_term: pair(b1_measured),
                b1_term_expected: pair(b1_expected),
                error,
            }
        })
        .collect();
    Ok(AFromB { a, leading })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoveringEstimate {
    /// Extrapolation of the boundary minimum to `|z| = 1`.
    pub value: f64,
    pub min_inner: f64,
    pub min_outer: f64,
    /// `1/(2|a2|)`, the radius guaranteed for the Koebe class extremal.
    pub koebe_line: f64,
}

pub const COVERING_RADII: (f64, f64) = (0.995, 0.999);

/// `min |w|` on circles near the boundary, extrapolated linearly to radius 1.
pub fn covering_radius(w: &HoloSeries, samples: usize) -> Result<CoveringEstimate> {
    check_normalized(w)?;
    if samples < 8 {
        return Err(Error::InvalidInput("need at least 8 boundary samples".into()));
    }
    let (r1, r2) = COVERING_RADII;
    let min_on = |rho: f64| circle_points(rho, samples).iter().map(|&z| w.eval_unchecked(z).norm()).fold(f64::INFINITY, f64::min);
    let (v1, v2) = (min_on(r1), min_on(r2));
    let value = v2 + (v2 - v1) * (1.0 - r2) / (r2 - r1);
    let a2 = if w.degree() >= 2 { w.coeff(2).norm() } else { 0.0 };
    let koebe_line = if a2 > 0.0 { 1.0 / (2.0 * a2) } else { f64::INFINITY };
    Ok(CoveringEstimate { value, min_inner: v1, min_outer: v2, koebe_line })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn koebe_schwarzian(n: usize) -> HoloSeries {
        // -6/(1-z²)² = -6 Σ (k+1) z^{2k}
        let mut s = vec![ZERO; n + 1];
        for k in 0..=n / 2 {
            s[2 * k] = c(-6.0 * (k + 1) as f64, 0.0);
        }
        HoloSeries::new(s, 1.0).unwrap()
    }

    #[test]
    fn moebius_maps_have_zero_schwarzian() {
        let w = HoloSeries::geometric(32).mul(&HoloSeries::identity(32)).unwrap();
        let s = schwarzian_of(&w).unwrap();
        assert!(s.coeffs().iter().take(25).all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn koebe_schwarzian_closed_form() {
        let s = schwarzian_of(&HoloSeries::koebe(40)).unwrap();
        assert!(s.max_coeff_diff(&koebe_schwarzian(37), 37) < 1e-9);
    }

    #[test]
    fn schwarzian_is_invariant_under_moebius_post_composition() {
        let w = HoloSeries::new(vec![ZERO, ONE, c(0.3, 0.1), c(-0.1, 0.05), c(0.02, 0.0)], 1.0).unwrap().truncate(32);
        let m = w.moebius(c(2.0, 1.0), c(0.5, 0.0), c(0.3, -0.2), c(1.0, 0.0)).unwrap();
        let (a, b) = (schwarzian_of(&w).unwrap(), schwarzian_of(&m).unwrap());
        assert!(a.max_coeff_diff(&b, 24) < 1e-10);
    }

    #[test]
    fn rejects_critical_point() {
        let w = HoloSeries::new(vec![ZERO, ZERO, ONE, ZERO], 1.0).unwrap();
        assert!(matches!(schwarzian_of(&w), Err(Error::NotLocallyUnivalent(_))));
    }

    #[test]
    fn zero_schwarzian_gives_identity() {
        let f = HoloSeries::constant(ZERO, 16);
        let s = solve_schwarz(&f, (ZERO, ONE, ZERO)).unwrap();
        assert!(s.w.max_coeff_diff(&HoloSeries::identity(16), 16) < 1e-15);
    }

    #[test]
    fn koebe_recovered_from_its_schwarzian() {
        let s = solve_schwarz(&koebe_schwarzian(64), (ZERO, ONE, c(4.0, 0.0))).unwrap();
        for m in 0..=20 {
            assert!((s.w.coeff(m) - c(m as f64, 0.0)).norm() < 1e-8, "a_{m}");
        }
        // truncation splits the double pole at 1 into nearby simple zeros
        assert!(s.validity_radius <= 1.0 && s.validity_radius > 0.9, "{}", s.validity_radius);
        assert!(s.warning().is_some());
    }

    #[test]
    fn wronskian_is_one() {
        let f = HoloSeries::new(vec![c(0.3, 0.1), c(-0.2, 0.0), c(0.1, 0.1)], 1.0).unwrap().truncate(32);
        let (e1, e2) = linear_solutions(&f);
        let wr = e1.derivative().mul(&e2.truncate(31)).unwrap().sub(&e1.truncate(31).mul(&e2.derivative()).unwrap()).unwrap();
        assert!(wr.max_coeff_diff(&HoloSeries::constant(ONE, 30), 30) < 1e-14);
    }

    #[test]
    fn inversion_of_identity_and_quadratic() {
        let f = invert_expansion(&HoloSeries::identity(8)).unwrap();
        assert_eq!(f.head(), Some(ONE));
        assert!(f.coeffs().iter().all(|b| b.norm() == 0.0));
        let a2 = c(0.3, -0.2);
        let w = HoloSeries::new(vec![ZERO, ONE, a2], 1.0).unwrap();
        let f = invert_expansion(&w).unwrap();
        assert!((f.coeff(0) + a2).norm() < 1e-16);
    }

    #[test]
    fn inversion_identity_carries_the_rotation() {
        for k in 0..8 {
            let theta = -PI + (k as f64 + 0.5) * PI / 4.0;
            let a2 = c(0.4, 0.1);
            let w = HoloSeries::new(vec![ZERO, Complex64::from_polar(1.0, theta), a2, c(0.05, 0.0)], 1.0).unwrap();
            let f = invert_expansion(&w).unwrap();
            let b0 = f.coeff(0);
            assert!((b0 + Complex64::from_polar(1.0, -2.0 * theta) * a2).norm() < 1e-15);
            assert!((f.head().unwrap() - Complex64::from_polar(1.0, -theta)).norm() < 1e-15);
        }
    }

    #[test]
    fn koebe_inversion_matches_sampled_laurent_expansion() {
        let w = HoloSeries::koebe(200);
        let f = invert_expansion(&w).unwrap();
        // 1/koebe(1/z) = z - 2 + 1/z exactly
        assert!((f.coeff(0) - c(-2.0, 0.0)).norm() < 1e-12);
        assert!((f.coeff(1) - ONE).norm() < 1e-12);
        assert!(f.coeffs().iter().skip(2).take(20).all(|b| b.norm() < 1e-10));
        let m = 256;
        let rho = 4.0;
        let samples: Vec<Complex64> = circle_points(rho, m).iter().map(|&z| 1.0 / w.eval_unchecked(1.0 / z)).collect();
        // Laurent coefficient of z^{-k} is the DFT bin -k scaled by rho^k
        for k in 0..4i32 {
            let bin: Complex64 = samples
                .iter()
                .enumerate()
                .map(|(i, v)| v * Complex64::from_polar(1.0, 2.0 * PI * (k as f64) * i as f64 / m as f64))
                .sum::<Complex64>()
                / m as f64
                * rho.powi(k);
            assert!((bin - f.coeff(k as usize)).norm() < 1e-10, "b{k}");
        }
    }

    #[test]
    fn recursion_inverts_the_expansion() {
        let theta = 0.7;
        let w = HoloSeries::new(
            vec![ZERO, Complex64::from_polar(1.0, theta), c(0.2, 0.1), c(-0.05, 0.02), c(0.01, 0.0)],
            1.0,
        )
        .unwrap()
        .truncate(12);
        let f = invert_expansion(&w).unwrap();
        let back = a_from_b_recursion(f.coeffs(), theta, 12).unwrap();
        assert!(back.a.max_coeff_diff(&w, 12) < 1e-12);
        assert!(back.leading.iter().all(|l| l.error < 1e-6), "{:?}", back.leading);
        let zero = a_from_b_recursion(&[ZERO; 6], theta, 6).unwrap();
        assert!(zero.a.coeffs().iter().skip(2).all(|v| v.norm() == 0.0));
        let two = a_from_b_recursion(&[c(0.3, 0.4)], theta, 2).unwrap();
        assert!((two.a.coeff(2) + Complex64::from_polar(1.0, 2.0 * theta) * c(0.3, 0.4)).norm() < 1e-15);
    }

    #[test]
    fn covering_radius_of_simple_maps() {
        let id = covering_radius(&HoloSeries::identity(1), 1024).unwrap();
        assert!((id.value - 1.0).abs() < 1e-12);
        let q = covering_radius(&HoloSeries::new(vec![ZERO, ONE, c(0.5, 0.0)], 1.0).unwrap(), 1024).unwrap();
        assert!(q.value >= 0.25);
        assert!((q.koebe_line - 1.0).abs() < 1e-15);
        assert!((q.value - 0.5).abs() < 1e-3);
    }
}
