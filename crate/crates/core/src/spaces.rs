//! Hilbert spaces of holomorphic functions on the unit disk and the weighted
//! sup-norms `B_p`.
//!
//! Every supported space is rotation invariant, so monomials are mutually
//! orthogonal and the norm reduces to `‖f‖² = Σ w_n |c_n|²`. Radial-measure
//! spaces get their weights from the moments `2π ∫_0^1 t^{2n+1} W(t) dt`,
//! computed with Gauss-Legendre quadrature in `t`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::series::HoloSeries;

pub const DEFAULT_NORM_DEGREE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    Diagonal,
    RadialMeasure,
}

/// Radial weight `W(|z|)` of a radial-measure space.
#[derive(Debug, Clone, PartialEq)]
pub enum RadialMeasure {
    /// `W ≡ 1/π`, the normalized area measure.
    Bergman,
    /// Piecewise-linear `W` through the `(t, W(t))` table.
    Table(Vec<(f64, f64)>),
}

impl RadialMeasure {
    pub fn weight(&self, t: f64) -> f64 {
        match self {
            RadialMeasure::Bergman => 1.0 / PI,
            RadialMeasure::Table(tab) => {
                if t <= tab[0].0 {
                    return tab[0].1;
                }
                for w in tab.windows(2) {
                    let ((t0, w0), (t1, w1)) = (w[0], w[1]);
                    if t <= t1 {
                        return w0 + (w1 - w0) * (t - t0) / (t1 - t0);
                    }
                }
                tab[tab.len() - 1].1
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceSpecJson", into = "SpaceSpecJson")]
pub struct SpaceSpec {
    kind: SpaceKind,
    /// Resolved diagonal weights `w_0..w_{N_norm}`.
    weights: Vec<f64>,
    measure: Option<RadialMeasure>,
    label: String,
    pub p_growth: f64,
    pub embed_const: Option<f64>,
}

impl SpaceSpec {
    /// Hardy space `H²`: `w_n = 1`.
    pub fn hardy() -> Self {
        Self::diagonal_fn("hardy", DEFAULT_NORM_DEGREE, |_| 1.0)
    }

    /// Bergman space with normalized area measure: `w_n = 1/(n+1)`.
    pub fn bergman() -> Self {
        Self::diagonal_fn("bergman", DEFAULT_NORM_DEGREE, |n| 1.0 / (n as f64 + 1.0))
    }

    /// Dirichlet-type space: `w_n = max(1, n)`.
    pub fn dirichlet() -> Self {
        Self::diagonal_fn("dirichlet", DEFAULT_NORM_DEGREE, |n| (n as f64).max(1.0))
    }

    pub fn diagonal_fn(label: &str, norm_degree: usize, w: impl Fn(usize) -> f64) -> Self {
        Self {
            kind: SpaceKind::Diagonal,
            weights: (0..=norm_degree).map(w).collect(),
            measure: None,
            label: label.to_string(),
            p_growth: 2.0,
            embed_const: None,
        }
    }

    /// Diagonal space with explicit weights; the last weight is repeated up to
    /// `norm_degree`.
    pub fn diagonal(weights: Vec<f64>, norm_degree: usize) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidInput("diagonal weights must be finite and positive".into()));
        }
        let last = *weights.last().unwrap();
        let mut w = weights;
        w.resize(norm_degree + 1, last);
        Ok(Self {
            kind: SpaceKind::Diagonal,
            weights: w,
            measure: None,
            label: "custom".into(),
            p_growth: 2.0,
            embed_const: None,
        })
    }

    /// Radial-measure space `(f, g) = ∬_D f conj(g) W(|z|) dA`.
    pub fn radial(measure: RadialMeasure, norm_degree: usize) -> Result<Self> {
        if let RadialMeasure::Table(tab) = &measure {
            if tab.len() < 2 || tab.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                return Err(Error::InvalidInput("measure table needs >= 2 increasing nodes".into()));
            }
            if tab.iter().any(|&(_, w)| !(w.is_finite() && w >= 0.0)) {
                return Err(Error::InvalidInput("measure table values must be non-negative".into()));
            }
        }
        // Exact for polynomial W of low degree; the table case is piecewise
        // linear so the integral is split at the table nodes.
        let gl = GaussLegendre::new(norm_degree + 16);
        let breaks: Vec<f64> = match &measure {
            RadialMeasure::Bergman => vec![0.0, 1.0],
            RadialMeasure::Table(tab) => {
                let mut b = vec![0.0];
                b.extend(tab.iter().map(|p| p.0).filter(|&t| t > 0.0 && t < 1.0));
                b.push(1.0);
                b
            }
        };
        let weights: Vec<f64> = (0..=norm_degree)
            .map(|n| {
                let e = 2 * n as i32 + 1;
                2.0 * PI
                    * breaks
                        .windows(2)
                        .map(|ab| gl.integrate(ab[0], ab[1], |t| t.powi(e) * measure.weight(t)))
                        .sum::<f64>()
            })
            .collect();
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidInput("radial measure has a vanishing monomial moment".into()));
        }
        let label = match measure {
            RadialMeasure::Bergman => "bergman-measure",
            RadialMeasure::Table(_) => "custom-table",
        };
        Ok(Self { kind: SpaceKind::RadialMeasure, weights, measure: Some(measure), label: label.into(), p_growth: 2.0, embed_const: None })
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn measure(&self) -> Option<&RadialMeasure> {
        self.measure.as_ref()
    }

    pub fn norm_degree(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// JSON form: `{"kind": "diagonal", "weights": [...]}`,
/// `{"kind": "diagonal", "preset": "hardy"}` or
/// `{"kind": "radial-measure", "measure": "bergman" | "custom-table", "table": [[t, W], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpaceSpecJson {
    kind: SpaceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    measure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_p_growth")]
    p_growth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embed_const: Option<f64>,
    #[serde(default = "default_norm_degree")]
    norm_degree: usize,
}

fn default_p_growth() -> f64 {
    2.0
}

fn default_norm_degree() -> usize {
    DEFAULT_NORM_DEGREE
}

impl TryFrom<SpaceSpecJson> for SpaceSpec {
    type Error = Error;

    fn try_from(j: SpaceSpecJson) -> Result<Self> {
        let nd = j.norm_degree;
        let mut spec = match j.kind {
            SpaceKind::Diagonal => match (j.preset.as_deref(), j.weights) {
                (Some("hardy"), None) => Self::diagonal_fn("hardy", nd, |_| 1.0),
                (Some("bergman"), None) => Self::diagonal_fn("bergman", nd, |n| 1.0 / (n as f64 + 1.0)),
                (Some("dirichlet"), None) => Self::diagonal_fn("dirichlet", nd, |n| (n as f64).max(1.0)),
                (None, Some(w)) => Self::diagonal(w, nd)?,
                (p, w) => {
                    return Err(Error::InvalidInput(format!(
                        "diagonal space needs exactly one of a known preset or weights (preset {p:?}, weights given: {})",
                        w.is_some()
                    )))
                }
            },
            SpaceKind::RadialMeasure => match j.measure.as_deref() {
                Some("bergman") => Self::radial(RadialMeasure::Bergman, nd)?,
                Some("custom-table") => {
                    let tab = j
                        .table
                        .ok_or_else(|| Error::InvalidInput("custom-table measure needs a table".into()))?;
                    Self::radial(RadialMeasure::Table(tab.iter().map(|p| (p[0], p[1])).collect()), nd)?
                }
                other => return Err(Error::InvalidInput(format!("unknown radial measure {other:?}"))),
            },
        };
        if !(j.p_growth >= 2.0) {
            return Err(Error::InvalidInput("p_growth must be >= 2".into()));
        }
        spec.p_growth = j.p_growth;
        spec.embed_const = j.embed_const;
        Ok(spec)
    }
}

impl From<SpaceSpec> for SpaceSpecJson {
    fn from(s: SpaceSpec) -> Self {
        let norm_degree = s.norm_degree();
        let (preset, weights, measure, table) = match (&s.kind, s.label.as_str(), &s.measure) {
            (SpaceKind::Diagonal, l @ ("hardy" | "bergman" | "dirichlet"), _) => (Some(l.to_string()), None, None, None),
            (SpaceKind::Diagonal, _, _) => (None, Some(s.weights.clone()), None, None),
            (_, _, Some(RadialMeasure::Table(t))) => {
                (None, None, Some("custom-table".into()), Some(t.iter().map(|&(a, b)| [a, b]).collect()))
            }
            _ => (None, None, Some("bergman".into()), None),
        };
        Self { kind: s.kind, preset, weights, measure, table, p_growth: s.p_growth, embed_const: s.embed_const, norm_degree }
    }
}

fn check_taylor(space: &SpaceSpec, f: &HoloSeries) -> Result<()> {
    if f.is_laurent() || f.center() != Complex64::new(0.0, 0.0) {
        return Err(Error::InvalidInput("Hilbert norms take Taylor series about 0".into()));
    }
    if f.degree() > space.norm_degree() {
        return Err(Error::InvalidInput(format!(
            "series degree {} exceeds the norm truncation {}",
            f.degree(),
            space.norm_degree()
        )));
    }
    Ok(())
}

/// `(f, g)_H = Σ w_n f_n conj(g_n)`.
pub fn hilbert_inner(space: &SpaceSpec, f: &HoloSeries, g: &HoloSeries) -> Result<Complex64> {
    check_taylor(space, f)?;
    check_taylor(space, g)?;
    Ok(f.coeffs()
        .iter()
        .zip(g.coeffs())
        .zip(&space.weights)
        .map(|((a, b), w)| a * b.conj() * *w)
        .sum())
}

pub fn hilbert_norm(space: &SpaceSpec, f: &HoloSeries) -> Result<f64> {
    check_taylor(space, f)?;
    Ok(f.coeffs().iter().zip(&space.weights).map(|(c, w)| w * c.norm_sqr()).sum::<f64>().sqrt())
}

/// Weighted norm of the coefficients above `from`, relative to the full norm.
/// Used to check that a composition actually used in a computation has
/// converged in the space.
pub fn membership_tail(space: &SpaceSpec, g: &HoloSeries, from: usize) -> Result<f64> {
    check_taylor(space, g)?;
    let total = hilbert_norm(space, g)?;
    if total == 0.0 {
        return Ok(0.0);
    }
    let tail: f64 = g.coeffs().iter().zip(&space.weights).skip(from + 1).map(|(c, w)| w * c.norm_sqr()).sum();
    Ok(tail.sqrt() / total)
}

/// Polar sampling grid for `B_p` sup-norms: `n_rad` rings with radii
/// `1 - ((n_rad - i)/n_rad)^2` (clustered towards the boundary, nested under
/// doubling) times `n_ang` equispaced angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BpGrid {
    pub n_rad: usize,
    pub n_ang: usize,
}

impl Default for BpGrid {
    fn default() -> Self {
        Self { n_rad: 512, n_ang: 512 }
    }
}

impl BpGrid {
    pub fn ring(&self, i: usize) -> f64 {
        let x = (self.n_rad - i) as f64 / self.n_rad as f64;
        1.0 - x * x
    }

    /// Largest gap between consecutive rings, the reported resolution.
    pub fn spacing(&self) -> f64 {
        let dr = 1.0 / self.n_rad as f64;
        dr.max(2.0 * PI / self.n_ang as f64)
    }

    pub fn points(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.n_rad * self.n_ang);
        for i in 0..self.n_rad {
            let r = self.ring(i);
            for j in 0..self.n_ang {
                out.push(Complex64::from_polar(r, 2.0 * PI * j as f64 / self.n_ang as f64));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpNorm {
    pub value: f64,
    pub argmax: [f64; 2],
    pub spacing: f64,
}

/// Discrete `sup (1 - |z|^2)^p |f(z)|` over a [`BpGrid`].
pub fn bp_norm_fn<F>(f: F, p: f64, grid: BpGrid) -> BpNorm
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    let rings: Vec<(f64, Complex64)> = (0..grid.n_rad)
        .into_par_iter()
        .map(|i| {
            let r = grid.ring(i);
            let w = (1.0 - r * r).powf(p);
            let mut best = (f64::NEG_INFINITY, Complex64::new(0.0, 0.0));
            for j in 0..grid.n_ang {
                let z = Complex64::from_polar(r, 2.0 * PI * j as f64 / grid.n_ang as f64);
                let v = w * f(z).norm();
                if v > best.0 {
                    best = (v, z);
                }
            }
            best
        })
        .collect();
    let (value, z) = rings.into_iter().fold((0.0, Complex64::new(0.0, 0.0)), |acc, r| if r.0 > acc.0 { r } else { acc });
    BpNorm { value, argmax: [z.re, z.im], spacing: grid.spacing() }
}

pub fn bp_norm(f: &HoloSeries, p: f64, grid: BpGrid) -> BpNorm {
    bp_norm_fn(|z| f.eval_unchecked(z), p, grid)
}

/// Lower bound for the constant in `‖f‖_{B_2} <= C ‖f‖_H`: the largest ratio
/// over the supplied nonzero samples.
pub fn embedding_ratio_max(space: &SpaceSpec, samples: &[HoloSeries], grid: BpGrid) -> Result<f64> {
    let mut best: f64 = 0.0;
    for f in samples {
        let h = hilbert_norm(space, f)?;
        if h == 0.0 {
            continue;
        }
        best = best.max(bp_norm(f, 2.0, grid).value / h);
    }
    Ok(best)
}

/// [`embedding_ratio_max`] over `count` random polynomials of degree <= 20
/// with complex Gaussian-like coefficients; deterministic in `seed`.
pub fn estimate_embedding_constant(space: &SpaceSpec, count: usize, seed: u64, grid: BpGrid) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<HoloSeries> = (0..count)
        .map(|_| {
            let deg = rng.gen_range(0..=20usize);
            let coeffs = (0..=deg).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            HoloSeries::new(coeffs, f64::INFINITY).expect("finite random coefficients")
        })
        .collect();
    embedding_ratio_max(space, &samples, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mono(n: usize) -> HoloSeries {
        let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
        c[n] = Complex64::new(1.0, 0.0);
        HoloSeries::new(c, f64::INFINITY).unwrap()
    }

    #[test]
    fn hardy_unit_monomial() {
        assert_eq!(hilbert_norm(&SpaceSpec::hardy(), &mono(5)).unwrap(), 1.0);
        let zero = HoloSeries::constant(Complex64::new(0.0, 0.0), 4);
        assert_eq!(hilbert_norm(&SpaceSpec::hardy(), &zero).unwrap(), 0.0);
    }

    #[test]
    fn bergman_measure_matches_moment_oracle() {
        let s = SpaceSpec::radial(RadialMeasure::Bergman, 64).unwrap();
        assert_abs_diff_eq!(hilbert_norm(&s, &mono(3)).unwrap(), 0.5, epsilon = 1e-14);
        for n in 0..=64 {
            assert_abs_diff_eq!(s.weights()[n], 1.0 / (n as f64 + 1.0), epsilon = 1e-13);
        }
    }

    #[test]
    fn custom_table_weights_are_moments() {
        // W(t) = t: moments 2π/(2n+3)
        let s = SpaceSpec::radial(RadialMeasure::Table(vec![(0.0, 0.0), (1.0, 1.0)]), 16).unwrap();
        for n in 0..=16 {
            assert_abs_diff_eq!(s.weights()[n], 2.0 * PI / (2.0 * n as f64 + 3.0), epsilon = 1e-13);
        }
    }

    #[test]
    fn inner_products() {
        let h = SpaceSpec::hardy();
        assert_eq!(hilbert_inner(&h, &mono(1), &mono(2)).unwrap(), Complex64::new(0.0, 0.0));
        let f = HoloSeries::from_real(&[1.0, 1.0], 2.0).unwrap();
        let g = HoloSeries::from_real(&[1.0, -1.0], 2.0).unwrap();
        assert_eq!(hilbert_inner(&h, &f, &g).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn radial_monomials_orthogonal_by_direct_quadrature() {
        // ∬ z^m conj(z^n) W dA over a polar grid with exact angular sums
        let grid = crate::quadrature::PolarGrid::new(Complex64::new(0.0, 0.0), 1.0, Default::default());
        for (m, n) in [(0, 1), (2, 5), (3, 3)] {
            let v: Complex64 = grid
                .nodes
                .iter()
                .zip(&grid.weights)
                .map(|(z, w)| z.powu(m) * z.powu(n).conj() * (*w / PI))
                .sum();
            let want = if m == n { 1.0 / (n as f64 + 1.0) } else { 0.0 };
            assert_abs_diff_eq!(v.re, want, epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bp_norm_constant_and_identity() {
        let c = HoloSeries::constant(Complex64::new(0.0, -3.0), 4);
        assert_abs_diff_eq!(bp_norm(&c, 2.0, BpGrid::default()).value, 3.0, epsilon = 1e-15);
        let grid = BpGrid { n_rad: 256, n_ang: 64 };
        let v = bp_norm(&HoloSeries::identity(1), 0.0, grid).value;
        assert!(v <= 1.0 && v >= 1.0 - grid.spacing());
    }

    #[test]
    fn bp_norm_of_koebe_schwarzian() {
        // -6/(1-z^2)^2 = -6 Σ (m+1) z^{2m}; along the real axis the weighted
        // modulus of the full function is exactly 6.
        let mut c = vec![Complex64::new(0.0, 0.0); 65];
        for m in 0..=32 {
            c[2 * m] = Complex64::new(-6.0 * (m as f64 + 1.0), 0.0);
        }
        let f = HoloSeries::new(c, 1.0).unwrap();
        let v = bp_norm(&f, 2.0, BpGrid::default()).value;
        assert!((v - 6.0).abs() < 1e-3, "{v}");
        let exact = bp_norm_fn(|z| -6.0 / (1.0 - z * z).powi(2), 2.0, BpGrid::default()).value;
        assert!((exact - 6.0).abs() < 1e-3, "{exact}");
    }

    #[test]
    fn bp_norm_monotone_under_refinement() {
        let f = HoloSeries::from_real(&[0.2, -1.0, 0.5, 3.0, 0.0, -2.0], 1.0).unwrap();
        let mut prev = 0.0;
        for k in 0..5 {
            let grid = BpGrid { n_rad: 8 << k, n_ang: 8 << k };
            let v = bp_norm(&f, 2.0, grid).value;
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn embedding_constant_single_and_monomials() {
        let h = SpaceSpec::hardy();
        let one = HoloSeries::constant(Complex64::new(1.0, 0.0), 0);
        assert_eq!(embedding_ratio_max(&h, &[one], BpGrid::default()).unwrap(), 1.0);
        // per-monomial oracle: sup (1-x^2)^2 x^n at x^2 = n/(n+4)
        let oracle = (0..=20)
            .map(|n| {
                let x2 = n as f64 / (n as f64 + 4.0);
                (1.0 - x2).powi(2) * x2.powf(n as f64 / 2.0)
            })
            .fold(0.0, f64::max);
        let samples: Vec<_> = (0..=20).map(mono).collect();
        let est = embedding_ratio_max(&h, &samples, BpGrid::default()).unwrap();
        assert_abs_diff_eq!(est, oracle, epsilon = 1e-6);
        let zero = HoloSeries::constant(Complex64::new(0.0, 0.0), 3);
        assert_eq!(embedding_ratio_max(&h, &[zero], BpGrid::default()).unwrap(), 0.0);
    }

    #[test]
    fn embedding_estimate_is_deterministic() {
        let h = SpaceSpec::bergman();
        let g = BpGrid { n_rad: 64, n_ang: 64 };
        let a = estimate_embedding_constant(&h, 20, 7, g).unwrap();
        let b = estimate_embedding_constant(&h, 20, 7, g).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0);
    }

    #[test]
    fn json_round_trip_and_rejections() {
        let s: SpaceSpec = serde_json::from_str(r#"{"kind":"diagonal","preset":"hardy","p_growth":2}"#).unwrap();
        assert_eq!(s, SpaceSpec::hardy());
        let js = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<SpaceSpec>(&js).unwrap(), s);
        let s: SpaceSpec = serde_json::from_str(r#"{"kind":"radial-measure","measure":"bergman","norm_degree":32}"#).unwrap();
        assert_eq!(s.kind(), SpaceKind::RadialMeasure);
        assert!(serde_json::from_str::<SpaceSpec>(r#"{"kind":"diagonal","weights":[1.0,-1.0]}"#).is_err());
        assert!(serde_json::from_str::<SpaceSpec>(r#"{"kind":"radial-measure","measure":"sobolev"}"#).is_err());
    }
}
