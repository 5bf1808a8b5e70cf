//! Polynomials in `u` and `conj(u)` on the unit disk, `u = (ζ - w0)/r`, with
//! the closed-form Cauchy and Beurling transforms of their monomials.
//!
//! For `|v| <= 1`
//!
//! ```text
//! T(u^p ū^q)(v) = (v^p v̄^{q+1} - [p >= q+1] v^{p-q-1}) / (q+1)
//! ```
//!
//! and for `|v| > 1`, `T(u^p ū^q)(v) = [p <= q] v^{p-q-1} / (q+1)`; the Beurling
//! transform is the `v`-derivative of these. On a disk of radius `r` the
//! transforms scale as `T ρ(w) = r T(ρ̃)(v)` and `Π ρ(w) = Π(ρ̃)(v)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct DiskPoly {
    degree: usize,
    /// `a[p * (degree + 1) + q]`, zero when `p + q > degree`.
    a: Vec<Complex64>,
}

impl DiskPoly {
    pub fn zero(degree: usize) -> Self {
        Self { degree, a: vec![ZERO; (degree + 1) * (degree + 1)] }
    }

    pub fn constant(c: Complex64, degree: usize) -> Self {
        let mut p = Self::zero(degree);
        p.set(0, 0, c);
        p
    }

    /// The single monomial `c u^p ū^q`.
    pub fn monomial(c: Complex64, p: usize, q: usize, degree: usize) -> Self {
        let mut out = Self::zero(degree.max(p + q));
        out.set(p, q, c);
        out
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    fn idx(&self, p: usize, q: usize) -> usize {
        p * (self.degree + 1) + q
    }

    pub fn get(&self, p: usize, q: usize) -> Complex64 {
        if p + q > self.degree {
            ZERO
        } else {
            self.a[self.idx(p, q)]
        }
    }

    pub fn set(&mut self, p: usize, q: usize, c: Complex64) {
        assert!(p + q <= self.degree, "monomial degree exceeds polynomial degree");
        let i = self.idx(p, q);
        self.a[i] = c;
    }

    fn terms(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        let d = self.degree;
        (0..=d).flat_map(move |p| (0..=d - p).map(move |q| (p, q, self.get(p, q)))).filter(|t| t.2 != ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().all(|c| *c == ZERO)
    }

    /// True when only `ū` powers occur.
    pub fn is_antiholomorphic(&self) -> bool {
        self.terms().all(|(p, _, _)| p == 0)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { degree: self.degree, a: self.a.iter().map(|c| c * s).collect() }
    }

    /// `self += s * other`, growing the degree if needed.
    pub fn add_scaled(&mut self, other: &Self, s: Complex64) {
        if other.degree > self.degree {
            let mut grown = Self::zero(other.degree);
            for (p, q, c) in self.terms() {
                grown.set(p, q, c);
            }
            *self = grown;
        }
        for (p, q, c) in other.terms() {
            let i = self.idx(p, q);
            self.a[i] += c * s;
        }
    }

    pub fn eval(&self, u: Complex64) -> Complex64 {
        let d = self.degree;
        let ub = u.conj();
        // Horner in ū for each power of u, then Horner in u.
        let mut acc = ZERO;
        for p in (0..=d).rev() {
            let mut inner = ZERO;
            for q in (0..=d - p).rev() {
                inner = inner * ub + self.a[p * (d + 1) + q];
            }
            acc = acc * u + inner;
        }
        acc
    }

    /// Product truncated at total degree `degree`.
    pub fn mul(&self, other: &Self, degree: usize) -> Self {
        self.mul_with_tail(other, degree).0
    }

    /// Truncated product and the sum of moduli of the dropped terms, a bound
    /// on the truncation error over the closed unit disk.
    pub fn mul_with_tail(&self, other: &Self, degree: usize) -> (Self, f64) {
        let mut out = Self::zero(degree);
        let mut tail = 0.0;
        let rhs: Vec<_> = other.terms().collect();
        for (p1, q1, c1) in self.terms() {
            for &(p2, q2, c2) in &rhs {
                if p1 + p2 + q1 + q2 <= degree {
                    let i = out.idx(p1 + p2, q1 + q2);
                    out.a[i] += c1 * c2;
                } else {
                    tail += (c1 * c2).norm();
                }
            }
        }
        (out, tail)
    }

    /// Sum of coefficient moduli, an upper bound for the sup over the disk.
    pub fn abs_sum(&self) -> f64 {
        self.a.iter().map(|c| c.norm()).sum()
    }

    /// Beurling transform restricted to the unit disk (a polynomial of the
    /// same degree).
    pub fn pi_inside(&self) -> Self {
        let mut out = Self::zero(self.degree);
        for (p, q, c) in self.terms() {
            let qf = (q + 1) as f64;
            if p >= 1 {
                let i = out.idx(p - 1, q + 1);
                out.a[i] += c * (p as f64 / qf);
            }
            if p >= q + 2 {
                let i = out.idx(p - q - 2, 0);
                out.a[i] -= c * ((p - q - 1) as f64 / qf);
            }
        }
        out
    }

    /// Closed-form Cauchy transform over the unit disk at `v`.
    pub fn cauchy_unit(&self, v: Complex64) -> Complex64 {
        let inside = v.norm() <= 1.0;
        let vb = v.conj();
        let mut acc = ZERO;
        for (p, q, c) in self.terms() {
            let qf = (q + 1) as f64;
            let val = if inside {
                let mut t = v.powu(p as u32) * vb.powu(q as u32 + 1);
                if p > q {
                    t -= v.powu((p - q - 1) as u32);
                }
                t / qf
            } else if p <= q {
                v.powi(p as i32 - q as i32 - 1) / qf
            } else {
                ZERO
            };
            acc += c * val;
        }
        acc
    }

    /// Closed-form Beurling transform over the unit disk at `v`.
    pub fn beurling_unit(&self, v: Complex64) -> Complex64 {
        if v.norm() <= 1.0 {
            return self.pi_inside().eval(v);
        }
        let mut acc = ZERO;
        for (p, q, c) in self.terms() {
            if p <= q {
                let e = p as i32 - q as i32 - 1;
                acc += c * v.powi(e - 1) * (e as f64 / (q + 1) as f64);
            }
        }
        acc
    }

    /// Expansion of `conj((ζ - pole)^{-order})` with `ζ = w0 + r u`, i.e.
    /// `conj(s^{-k} (1 + q u)^{-k})` with `s = w0 - pole`, `q = r/s`.
    /// Returns the polynomial and a bound on the dropped tail.
    pub fn conj_phi(order: u32, pole: Complex64, w0: Complex64, r: f64, degree: usize) -> Result<(Self, f64)> {
        let s = w0 - pole;
        let q = r / s;
        if !(q.norm() < 1.0) {
            return Err(Error::SingularKernel(format!("pole {pole} lies in the closed disk D({w0}, {r})")));
        }
        let lead = s.powi(-(order as i32));
        let mut out = Self::zero(degree);
        // binom(-k, m) q^m, built incrementally
        let mut term = lead;
        let k = order as f64;
        for m in 0..=degree {
            out.set(0, m, term.conj());
            term *= -q * ((k + m as f64) / (m as f64 + 1.0));
        }
        let ratio = q.norm() * (k + degree as f64 + 1.0) / (degree as f64 + 2.0);
        let tail = if ratio < 1.0 { term.norm() / (1.0 - ratio) } else { f64::INFINITY };
        Ok((out, tail))
    }

    /// Weighted least-squares fit of grid samples; `nodes` are normalized
    /// coordinates `u`. Returns the polynomial and the weighted RMS residual.
    pub fn fit(nodes: &[Complex64], values: &[Complex64], weights: &[f64], degree: usize) -> Result<(Self, f64)> {
        let basis: Vec<(usize, usize)> = (0..=degree).flat_map(|p| (0..=degree - p).map(move |q| (p, q))).collect();
        if nodes.len() < basis.len() {
            return Err(Error::RankDeficient(format!("{} samples for {} monomials", nodes.len(), basis.len())));
        }
        let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let a = DMatrix::from_fn(nodes.len(), basis.len(), |i, j| {
            let (p, q) = basis[j];
            nodes[i].powu(p as u32) * nodes[i].conj().powu(q as u32) * sw[i]
        });
        let b = DVector::from_fn(nodes.len(), |i, _| values[i] * sw[i]);
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let x = svd
            .solve(&b, smax * 1e-13)
            .map_err(|e| Error::RankDeficient(e.to_string()))?;
        let resid = (&a * &x - &b).norm();
        let total_w: f64 = weights.iter().sum();
        let mut out = Self::zero(degree);
        for (j, &(p, q)) in basis.iter().enumerate() {
            out.set(p, q, x[j]);
        }
        Ok((out, resid / total_w.sqrt()))
    }
}
