//! Truncated Taylor series (with an optional single Laurent term) and the
//! arithmetic every other module builds on.
//!
//! A [`HoloSeries`] stores `c_0..c_N` about a center together with the radius
//! of the disk where the underlying function is holomorphic. Binary operations
//! pad the shorter operand with zeros, i.e. a short coefficient vector is read
//! as an exact polynomial, and truncate the result at the longer degree.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default truncation degree shared by all modules.
pub const DEFAULT_DEGREE: usize = 64;
/// Default radius of the sampling circle used for coefficient recovery.
pub const DEFAULT_SAMPLE_RADIUS: f64 = 0.9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct HoloSeries {
    coeffs: Vec<Complex64>,
    center: Complex64,
    radius: f64,
    /// Coefficient of `(z - center)^{-1}`, present only for inverted expansions.
    head: Option<Complex64>,
}

impl HoloSeries {
    /// Taylor series about the origin, holomorphic in `|z| < radius`.
    pub fn new(coeffs: Vec<Complex64>, radius: f64) -> Result<Self> {
        Self::with_center(coeffs, Complex64::new(0.0, 0.0), radius)
    }

    pub fn with_center(coeffs: Vec<Complex64>, center: Complex64, radius: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidInput("series needs at least one coefficient".into()));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidInput("series coefficients must be finite".into()));
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidInput(format!("radius must be positive, got {radius}")));
        }
        Ok(Self { coeffs, center, radius, head: None })
    }

    /// Real coefficients, convenient for tests and closed forms.
    pub fn from_real(coeffs: &[f64], radius: f64) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect(), radius)
    }

    pub fn constant(c: Complex64, degree: usize) -> Self {
        let mut coeffs = vec![ZERO; degree + 1];
        coeffs[0] = c;
        Self { coeffs, center: ZERO, radius: f64::INFINITY, head: None }
    }

    /// The identity `z`, padded to `degree`.
    pub fn identity(degree: usize) -> Self {
        let mut coeffs = vec![ZERO; degree.max(1) + 1];
        coeffs[1] = ONE;
        Self { coeffs, center: ZERO, radius: f64::INFINITY, head: None }
    }

    /// `1/(1 - z)` truncated at `degree`.
    pub fn geometric(degree: usize) -> Self {
        Self { coeffs: vec![ONE; degree + 1], center: ZERO, radius: 1.0, head: None }
    }

    /// The Koebe function `z/(1-z)^2 = sum n z^n`.
    pub fn koebe(degree: usize) -> Self {
        let coeffs = (0..=degree).map(|n| Complex64::new(n as f64, 0.0)).collect();
        Self { coeffs, center: ZERO, radius: 1.0, head: None }
    }

    /// Attach a `(z - center)^{-1}` term, turning this into a Laurent series.
    pub fn with_head(mut self, head: Complex64) -> Self {
        self.head = Some(head);
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or(ZERO)
    }

    pub fn head(&self) -> Option<Complex64> {
        self.head
    }

    pub fn center(&self) -> Complex64 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_laurent(&self) -> bool {
        self.head.is_some()
    }

    /// Horner evaluation; the point must lie strictly inside the validity disk.
    pub fn evaluate(&self, z: Complex64) -> Result<Complex64> {
        let t = z - self.center;
        let dist = t.norm();
        if !(dist < self.radius) {
            return Err(Error::OutOfRange { z, dist, radius: self.radius });
        }
        Ok(self.eval_unchecked(z))
    }

    /// Horner evaluation without the domain check.
    pub fn eval_unchecked(&self, z: Complex64) -> Complex64 {
        let t = z - self.center;
        let mut acc = self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * t + c);
        if let Some(h) = self.head {
            acc += h / t;
        }
        acc
    }

    /// Geometric-decay estimate of the truncation tail at distance `rho`
    /// from the center, fitted on the top quarter of the coefficients.
    pub fn tail_bound(&self, rho: f64) -> f64 {
        let n = self.degree();
        let start = (3 * n / 4).max(1);
        let mut ratio: f64 = 0.0;
        let mut top: f64 = 0.0;
        for k in start..=n {
            let a = self.coeffs[k].norm() * rho.powi(k as i32);
            top = top.max(a);
            let b = self.coeffs[k - 1].norm() * rho.powi(k as i32 - 1);
            if b > 0.0 {
                ratio = ratio.max(a / b);
            }
        }
        if top == 0.0 {
            return 0.0;
        }
        if ratio >= 1.0 {
            return f64::INFINITY;
        }
        top * ratio / (1.0 - ratio)
    }

    fn common(&self, other: &Self) -> Result<(usize, f64)> {
        if self.is_laurent() || other.is_laurent() {
            return Err(Error::InvalidInput("series arithmetic is defined for Taylor series only".into()));
        }
        if (self.center - other.center).norm() > 0.0 {
            return Err(Error::InvalidInput("series have different centers".into()));
        }
        Ok((self.degree().max(other.degree()), self.radius.min(other.radius)))
    }

    fn padded(&self, degree: usize) -> Vec<Complex64> {
        let mut c = self.coeffs.clone();
        c.resize(degree + 1, ZERO);
        c.truncate(degree + 1);
        c
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let (n, radius) = self.common(other)?;
        let mut c = self.padded(n);
        for (a, b) in c.iter_mut().zip(other.coeffs.iter()) {
            *a += *b;
        }
        Ok(Self { coeffs: c, center: self.center, radius, head: None })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-ONE))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            center: self.center,
            radius: self.radius,
            head: self.head.map(|h| h * s),
        }
    }

    /// Add a constant to the `c_0` coefficient.
    pub fn shift(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    /// Cauchy product truncated at the common degree.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        let (n, radius) = self.common(other)?;
        let a = self.padded(n);
        let b = other.padded(n);
        let mut c = vec![ZERO; n + 1];
        for (i, &ai) in a.iter().enumerate() {
            if ai == ZERO {
                continue;
            }
            for (j, &bj) in b[..=n - i].iter().enumerate() {
                c[i + j] += ai * bj;
            }
        }
        Ok(Self { coeffs: c, center: self.center, radius, head: None })
    }

    /// `self / other`, requiring `other(center) != 0`.
    pub fn div(&self, other: &Self) -> Result<Self> {
        let (n, radius) = self.common(other)?;
        let b0 = other.coeffs[0];
        if b0.norm() == 0.0 {
            return Err(Error::SingularDivision(0.0));
        }
        let a = self.padded(n);
        let b = other.padded(n);
        let mut q = vec![ZERO; n + 1];
        for k in 0..=n {
            let mut acc = a[k];
            for i in 1..=k {
                acc -= b[i] * q[k - i];
            }
            q[k] = acc / b0;
        }
        Ok(Self { coeffs: q, center: self.center, radius, head: None })
    }

    pub fn recip(&self) -> Result<Self> {
        Self::constant(ONE, self.degree()).with_radius(self.radius).div(self)
    }

    /// Term-by-term derivative; the degree drops by one.
    pub fn derivative(&self) -> Self {
        let coeffs = if self.degree() == 0 {
            vec![ZERO]
        } else {
            self.coeffs.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect()
        };
        Self { coeffs, center: self.center, radius: self.radius, head: None }
    }

    /// Homotopy `z -> f(r z)`; `r = 0` collapses to the constant `c_0`.
    pub fn dilate(&self, r: f64) -> Self {
        let mut p = 1.0;
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                let v = c * p;
                p *= r;
                v
            })
            .collect();
        let radius = if r == 0.0 { f64::INFINITY } else { self.radius / r.abs() };
        Self { coeffs, center: self.center, radius, head: self.head.map(|h| h / r) }
    }

    /// `exp(self)` via the recurrence `E' = g' E`.
    pub fn exp(&self) -> Self {
        let n = self.degree();
        let g = &self.coeffs;
        let mut e = vec![ZERO; n + 1];
        e[0] = g[0].exp();
        for k in 1..=n {
            let mut acc = ZERO;
            for i in 1..=k {
                acc += g[i] * (i as f64) * e[k - i];
            }
            e[k] = acc / k as f64;
        }
        Self { coeffs: e, center: self.center, radius: self.radius, head: None }
    }

    /// Post-composition with the Moebius map `w -> (a w + b)/(c w + d)`.
    pub fn moebius(&self, a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let num = self.scale(a).shift(b);
        let den = self.scale(c).shift(d);
        num.div(&den)
    }

    /// Coefficients truncated or zero-padded to `degree`.
    pub fn truncate(&self, degree: usize) -> Self {
        Self { coeffs: self.padded(degree), center: self.center, radius: self.radius, head: self.head }
    }

    /// Largest coefficient difference through `degree`.
    pub fn max_coeff_diff(&self, other: &Self, degree: usize) -> f64 {
        (0..=degree).map(|k| (self.coeff(k) - other.coeff(k)).norm()).fold(0.0, f64::max)
    }
}

/// Coefficients recovered from samples on a circle, with the aliasing estimate.
#[derive(Debug, Clone)]
pub struct CircleRecovery {
    pub series: HoloSeries,
    pub alias_bound: f64,
}

/// Recover `c_0..c_degree` from `M` equispaced samples of a holomorphic
/// function on `|z| = rho`.
///
/// Requires `M` a power of two with `M >= 4 degree`. The aliasing estimate is
/// the largest discrete Fourier coefficient in the upper half of the frequency
/// band (which a resolved holomorphic function leaves at roundoff level),
/// rescaled by `rho^{-degree}`.
pub fn coeffs_from_circle_samples(samples: &[Complex64], rho: f64, degree: usize) -> Result<CircleRecovery> {
    let m = samples.len();
    if m < 4 || !m.is_power_of_two() || m < 4 * degree {
        return Err(Error::InvalidInput(format!(
            "need a power-of-two sample count >= 4*degree = {}, got {m}",
            4 * degree
        )));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidInput("sampling radius must be positive".into()));
    }
    let mut buf = samples.to_vec();
    let fft: Arc<dyn rustfft::Fft<f64>> = FftPlanner::new().plan_fft_forward(m);
    fft.process(&mut buf);
    let scale = 1.0 / m as f64;
    let coeffs: Vec<Complex64> =
        (0..=degree).map(|k| buf[k] * scale / rho.powi(k as i32)).collect();
    let tail = buf[m / 4..3 * m / 4].iter().map(|c| c.norm() * scale).fold(0.0, f64::max);
    let alias_bound = tail / rho.powi(degree as i32);
    let series = HoloSeries { coeffs, center: ZERO, radius: rho, head: None };
    Ok(CircleRecovery { series, alias_bound })
}

/// Like [`coeffs_from_circle_samples`] but fails when the aliasing estimate
/// exceeds `tol`.
pub fn coeffs_from_circle_samples_checked(
    samples: &[Complex64],
    rho: f64,
    degree: usize,
    tol: f64,
) -> Result<CircleRecovery> {
    let rec = coeffs_from_circle_samples(samples, rho, degree)?;
    if rec.alias_bound > tol {
        return Err(Error::Resolution { bound: rec.alias_bound, tol });
    }
    Ok(rec)
}

/// `M` equispaced points on `|z| = rho`, starting at `z = rho`.
pub fn circle_points(rho: f64, m: usize) -> Vec<Complex64> {
    (0..m).map(|k| Complex64::from_polar(rho, 2.0 * PI * k as f64 / m as f64)).collect()
}

/// Serialize a series as a JSON array of `[re, im]` pairs.
pub fn to_pairs(coeffs: &[Complex64]) -> Vec<[f64; 2]> {
    coeffs.iter().map(|c| [c.re, c.im]).collect()
}

pub fn from_pairs(pairs: &[[f64; 2]]) -> Vec<Complex64> {
    pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect()
}

impl Serialize for HoloSeries {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.head {
            None => to_pairs(&self.coeffs).serialize(s),
            Some(h) => {
                #[derive(Serialize)]
                struct Laurent {
                    head: [f64; 2],
                    coeffs: Vec<[f64; 2]>,
                }
                Laurent { head: [h.re, h.im], coeffs: to_pairs(&self.coeffs) }.serialize(s)
            }
        }
    }
}

/// Plain pair arrays deserialize to a Taylor series about 0 on the unit disk.
impl<'de> Deserialize<'de> for HoloSeries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Plain(Vec<[f64; 2]>),
            Laurent { head: [f64; 2], coeffs: Vec<[f64; 2]> },
        }
        let (head, pairs) = match Repr::deserialize(d)? {
            Repr::Plain(p) => (None, p),
            Repr::Laurent { head, coeffs } => (Some(Complex64::new(head[0], head[1])), coeffs),
        };
        let mut s = HoloSeries::new(from_pairs(&pairs), 1.0).map_err(de::Error::custom)?;
        s.head = head;
        Ok(s)
    }
}
