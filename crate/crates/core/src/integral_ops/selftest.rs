//! Quadrature transforms checked against closed forms on a fixed probe set.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::{beurling_pi, cauchy_t, closed_form_pi, closed_form_t, pairing_closed_form, pairing_phi, wirtinger_fd};
use super::{Density, Disk, DiskPoly, Term};
use crate::error::Result;
use crate::quadrature::QuadratureConfig;

#[derive(Debug, Clone, Serialize)]
pub struct SelfTestCase {
    pub name: String,
    pub probes: usize,
    pub max_error: f64,
    pub tol: f64,
    pub pass: bool,
}

fn case(name: &str, errors: impl IntoIterator<Item = f64>, tol: f64) -> SelfTestCase {
    let (mut probes, mut max_error) = (0, 0.0f64);
    for e in errors {
        probes += 1;
        max_error = if e.is_finite() { max_error.max(e) } else { f64::INFINITY };
    }
    SelfTestCase { name: name.into(), probes, max_error, tol, pass: max_error <= tol }
}

/// Probes on rings inside and outside `disk`, avoiding the circle itself.
pub fn probe_points(disk: Disk, per_ring: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let ring = |s: f64, phase: f64| -> Vec<Complex64> {
        (0..per_ring)
            .map(|k| disk.center + Complex64::from_polar(s * disk.radius, 2.0 * PI * (k as f64 + phase) / per_ring as f64))
            .collect()
    };
    let mut inside = vec![disk.center];
    for (i, s) in [0.1, 0.3, 0.5, 0.7, 0.9].into_iter().enumerate() {
        inside.extend(ring(s, 0.37 * i as f64));
    }
    let mut outside = Vec::new();
    for (i, s) in [1.1, 1.3, 2.0, 4.0, 10.0].into_iter().enumerate() {
        outside.extend(ring(s, 0.21 * i as f64));
    }
    (inside, outside)
}

/// The closed-form identity suite at quadrature resolution `quad`.
pub fn run_selftest(quad: QuadratureConfig) -> Result<Vec<SelfTestCase>> {
    let disk = Disk::new(Complex64::new(0.4, -0.2), 0.7)?;
    let (inside, outside) = probe_points(disk, 20);
    let w0 = disk.center;
    let r2 = disk.radius * disk.radius;
    let one = Complex64::new(1.0, 0.0);
    let chi = Density::new(disk, vec![(one, Term::Indicator)], quad)?;

    let mut cases = vec![
        case("T indicator inside = conj(w - w0)", inside.iter().map(|&w| (cauchy_t(&chi, w) - (w - w0).conj()).norm()), 1e-8),
        case("T indicator outside = r^2/(w - w0)", outside.iter().map(|&w| (cauchy_t(&chi, w) - r2 / (w - w0)).norm()), 1e-8),
        case("Pi indicator inside = 0", inside.iter().map(|&w| beurling_pi(&chi, w).norm()), 1e-8),
        case(
            "Pi indicator outside = -r^2/(w - w0)^2",
            outside.iter().map(|&w| (beurling_pi(&chi, w) + r2 / ((w - w0) * (w - w0))).norm()),
            1e-8,
        ),
    ];

    let mut poly = DiskPoly::monomial(Complex64::new(0.6, 0.3), 1, 2, 8);
    poly.add_scaled(&DiskPoly::monomial(Complex64::new(-0.2, 0.5), 0, 3, 8), one);
    let smooth = Density::new(disk, vec![(one, Term::Poly(poly)), (Complex64::new(0.3, -0.1), Term::ConjPhi { order: 2, pole: Complex64::new(2.0, 1.0) })], quad)?;
    let all: Vec<Complex64> = inside.iter().chain(&outside).copied().collect();
    cases.push(case(
        "T smooth density = monomial closed form",
        all.iter().map(|&w| Ok::<f64, crate::error::Error>((cauchy_t(&smooth, w) - closed_form_t(&smooth, w)?).norm())).collect::<Result<Vec<_>>>()?,
        1e-8,
    ));
    cases.push(case(
        "Pi smooth density = monomial closed form",
        all.iter().map(|&w| Ok::<f64, crate::error::Error>((beurling_pi(&smooth, w) - closed_form_pi(&smooth, w)?).norm())).collect::<Result<Vec<_>>>()?,
        1e-8,
    ));
    let poles = [Complex64::new(2.0, 0.5), Complex64::new(-1.0, -1.5), Complex64::new(0.4, 1.2)];
    let mut pair_errors = Vec::new();
    for &pole in &poles {
        for order in 2..=4 {
            let quad_value = pairing_phi(&smooth, order, pole)?.value;
            pair_errors.push((quad_value - pairing_closed_form(&smooth, order, pole)?).norm());
        }
    }
    cases.push(case("pairing with (z - c)^-k = moment closed form", pair_errors, 1e-10));
    let h = 1e-4;
    let fd: Vec<(Complex64, Complex64)> =
        inside.iter().filter(|w| (**w - w0).norm() < 0.75 * disk.radius).map(|&w| wirtinger_fd(|z| cauchy_t(&smooth, z), w, h)).collect();
    let probes: Vec<Complex64> = inside.iter().filter(|w| (**w - w0).norm() < 0.75 * disk.radius).copied().collect();
    cases.push(case(
        "d/dwbar T rho = rho",
        probes.iter().zip(&fd).map(|(&w, (_, dbar))| (dbar - smooth.eval(w)).norm()),
        1e-5,
    ));
    cases.push(case(
        "d/dw T rho = Pi rho",
        probes.iter().zip(&fd).map(|(&w, (dw, _))| (dw - beurling_pi(&smooth, w)).norm()),
        1e-5,
    ));
    Ok(cases)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let cases = run_selftest(QuadratureConfig::default()).unwrap();
        for c in &cases {
            assert!(c.pass, "{c:?}");
            assert!(c.probes > 0);
        }
    }
}
