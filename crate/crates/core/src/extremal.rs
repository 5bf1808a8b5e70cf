//! Search harnesses for coefficient problems: lower bounds for
//! `sup |c_n|` over nonvanishing unit-norm functions, and sampled checks of
//! the coefficient bounds inherited from the function maximizing `|c_1|` over a
//! family.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::schwarzian::solve_schwarz_within;
use crate::series::HoloSeries;
use crate::spaces::{bp_norm, hilbert_norm, BpGrid, SpaceSpec};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest degree of the exponent polynomial `g` in `f = exp(g)`.
pub const MAX_EXPONENT_DEGREE: usize = 12;
/// Bound on each exponent coefficient, keeping `exp(g)` resolved by the
/// norm truncation.
const EXPONENT_BOUND: f64 = 2.0;
/// Candidates evaluated per incumbent update.
const CHUNK: usize = 64;
/// Relative weighted tail above which a candidate is discarded as unresolved.
const TAIL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateSource {
    Random,
    Homotopy,
    Ascent,
}

/// A candidate that raised the running sup.
#[derive(Debug, Clone, Serialize)]
pub struct Improvement {
    pub sample: usize,
    pub value: f64,
    pub norm: f64,
    pub min_modulus: f64,
    pub source: CandidateSource,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchRecord {
    pub space: SpaceSpec,
    pub n: usize,
    /// Running sup of `|c_n|`, a lower bound for the extremal value.
    pub best_value: f64,
    pub best_f: Option<HoloSeries>,
    /// Exponent `g` with `best_f = exp(g)/‖exp(g)‖`.
    pub best_exponent: Option<HoloSeries>,
    pub samples: usize,
    /// Candidates discarded because the norm truncation did not resolve them.
    pub unresolved: usize,
    pub seed: u64,
    pub improvements: Vec<Improvement>,
}

struct Candidate {
    g: Vec<Complex64>,
    source: CandidateSource,
}

struct Scored {
    g: Vec<Complex64>,
    f: HoloSeries,
    value: f64,
    norm: f64,
    source: CandidateSource,
}

fn random_exponent(rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let deg = rng.gen_range(0..=MAX_EXPONENT_DEGREE);
    let amp = rng.gen_range(0.0..EXPONENT_BOUND);
    let mut g = vec![ZERO; MAX_EXPONENT_DEGREE + 1];
    g[0] = Complex64::new(0.0, rng.gen_range(-PI..PI));
    for (k, gk) in g.iter_mut().enumerate().take(deg + 1).skip(1) {
        let r = amp * rng.gen_range(0.0f64..1.0).sqrt() / k as f64;
        *gk = Complex64::from_polar(r, rng.gen_range(-PI..PI));
    }
    g
}

fn clamp(g: &mut [Complex64]) {
    for c in g.iter_mut() {
        if c.norm() > EXPONENT_BOUND {
            *c *= EXPONENT_BOUND / c.norm();
        }
    }
}

/// Candidate number `index`, drawn from its own stream so that runs with a
/// larger budget extend runs with a smaller one.
fn candidate(seed: u64, index: usize, chunk: usize, incumbent: Option<&[Complex64]>) -> Candidate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let Some(inc) = incumbent else {
        return Candidate { g: random_exponent(&mut rng), source: CandidateSource::Random };
    };
    match index % 4 {
        0 => Candidate { g: random_exponent(&mut rng), source: CandidateSource::Random },
        1 => {
            // f_r(z) = f(rz) scales the k-th exponent coefficient by r^k
            let r: f64 = rng.gen_range(0.0..1.0);
            let g = inc.iter().enumerate().map(|(k, c)| c * r.powi(k as i32)).collect();
            Candidate { g, source: CandidateSource::Homotopy }
        }
        _ => {
            let step = (0.5 * 0.97f64.powi(chunk as i32)).max(1e-4);
            let k = rng.gen_range(1..=MAX_EXPONENT_DEGREE);
            let mut g = inc.to_vec();
            g[k] += Complex64::from_polar(step * rng.gen_range(0.0f64..1.0), rng.gen_range(-PI..PI));
            clamp(&mut g);
            Candidate { g, source: CandidateSource::Ascent }
        }
    }
}

/// `exp(g)` through the norm truncation, rescaled to unit norm; `None` when
/// the truncation leaves a visible tail.
fn normalized_exp(space: &SpaceSpec, g: &[Complex64]) -> Option<(HoloSeries, f64)> {
    let deg = space.norm_degree();
    let mut padded = vec![ZERO; deg + 1];
    for (p, c) in padded.iter_mut().zip(g) {
        *p = *c;
    }
    let f = HoloSeries::new(padded, f64::INFINITY).ok()?.exp();
    let norm = hilbert_norm(space, &f).ok()?;
    if !(norm > 0.0 && norm.is_finite()) {
        return None;
    }
    let w = space.weights();
    let tail: f64 = f.coeffs().iter().zip(w).skip(deg.saturating_sub(8)).map(|(c, w)| w * c.norm_sqr()).sum::<f64>().sqrt();
    if tail > TAIL_TOL * norm {
        return None;
    }
    let f = f.scale(Complex64::new(1.0 / norm, 0.0));
    let norm = hilbert_norm(space, &f).ok()?;
    Some((f, norm))
}

/// Minimum of `|f|` over rings up to the unit circle.
pub fn min_modulus(f: &HoloSeries) -> f64 {
    let grid = BpGrid { n_rad: 32, n_ang: 128 };
    let mut pts = grid.points();
    pts.extend((0..256).map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / 256.0)));
    pts.par_iter().map(|&z| f.eval_unchecked(z).norm()).reduce(|| f64::INFINITY, f64::min)
}

/// Running sup of `|c_n|` over `budget` nonvanishing candidates
/// `exp(g)/‖exp(g)‖`: fresh random exponents of degree at most
/// [`MAX_EXPONENT_DEGREE`], dilations `f(rz)` of the incumbent and coordinate
/// steps on its exponent. Deterministic in `seed`, and never smaller for a
/// larger budget.
pub fn hsz_search(space: &SpaceSpec, n: usize, budget: usize, seed: u64) -> Result<SearchRecord> {
    if n > space.norm_degree() {
        return Err(Error::InvalidInput(format!("index {n} exceeds the norm truncation {}", space.norm_degree())));
    }
    let mut rec = SearchRecord {
        space: space.clone(),
        n,
        best_value: 0.0,
        best_f: None,
        best_exponent: None,
        samples: 0,
        unresolved: 0,
        seed,
        improvements: Vec::new(),
    };
    let mut best_g: Option<Vec<Complex64>> = None;
    let mut start = 0;
    let mut chunk = 0;
    while start < budget {
        let end = (start + CHUNK).min(budget);
        let inc = best_g.clone();
        let scored: Vec<Option<Scored>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let cand = candidate(seed, i, chunk, inc.as_deref());
                normalized_exp(space, &cand.g).map(|(f, norm)| Scored {
                    value: f.coeff(n).norm(),
                    g: cand.g,
                    f,
                    norm,
                    source: cand.source,
                })
            })
            .collect();
        for (offset, s) in scored.into_iter().enumerate() {
            rec.samples += 1;
            let Some(s) = s else {
                rec.unresolved += 1;
                continue;
            };
            if s.value > rec.best_value {
                rec.improvements.push(Improvement {
                    sample: start + offset,
                    value: s.value,
                    norm: s.norm,
                    min_modulus: min_modulus(&s.f),
                    source: s.source,
                });
                rec.best_value = s.value;
                rec.best_exponent = Some(HoloSeries::new(s.g.clone(), f64::INFINITY)?);
                rec.best_f = Some(s.f);
                best_g = Some(s.g);
            }
        }
        start = end;
        chunk += 1;
    }
    Ok(rec)
}

/// `|c_1|` of `exp(tz)/‖exp(tz)‖` in `space`.
pub fn exponential_scan_value(space: &SpaceSpec, t: f64) -> Result<f64> {
    let mut g = vec![ZERO; 2];
    g[1] = Complex64::new(t, 0.0);
    let (f, _) = normalized_exp(space, &g).ok_or(Error::Resolution { bound: f64::INFINITY, tol: TAIL_TOL })?;
    Ok(f.coeff(1).norm())
}

/// Exploratory comparison of coefficient bounds on a finite family.
pub const BOUNDS_HEADER: &str = "exploratory non-falsification on a finite sampled family, not a proof check; \
f0 is the sampled argmax of |c_1|, not a proven extremal";
/// The family is not verified to reach the boundary of the universal Teichmüller space.
pub const HYPOTHESIS_LABEL: &str = "hypothesis-unchecked";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// `|c_k| <= max(|c_1^0|, |c_k^0|)` for `k >= 2`.
    Coefficient,
    /// `|a_m| <= |a_m^0|` for `m >= 3` of the normalized solution `w`.
    Univalent,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub member: usize,
    pub kind: BoundKind,
    pub index: usize,
    pub value: f64,
    pub bound: f64,
    pub excess: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MemberRow {
    pub member: usize,
    /// `|c_k|` for `k = 2..=n`.
    pub c_abs: Vec<f64>,
    /// `max(|c_1^0|, |c_k^0|)` for `k = 2..=n`.
    pub c_bound: Vec<f64>,
    /// `|a_m|` for `m = 3..=n+2`; empty when the solution has a pole in the closed disk.
    pub a_abs: Vec<f64>,
    pub validity_radius: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub header: String,
    pub hypothesis: String,
    pub n: usize,
    pub members: usize,
    pub f0_member: Option<usize>,
    pub c1_0: f64,
    /// `|a_m^0|` for `m = 3..=n+2`.
    pub a_0: Vec<f64>,
    pub rows: Vec<MemberRow>,
    /// Members whose normalized solution has a pole in the closed disk; their
    /// `a_m` are not compared.
    pub not_univalent: Vec<usize>,
    pub tol: f64,
    pub violations: Vec<Violation>,
}

impl BoundsReport {
    pub fn coefficient_violations(&self) -> usize {
        self.violations.iter().filter(|v| v.kind == BoundKind::Coefficient).count()
    }
}

/// Poles of the normalized solutions are only located below this radius.
const POLE_SEARCH_LIMIT: f64 = 1.5;

/// Taylor coefficients of `w` with `S_w = f`, `w(0) = 0`, `w'(0) = 1`,
/// `w''(0) = 0`, and the radius of its first pole.
fn normalized_solution(f: &HoloSeries, degree: usize) -> Result<(Vec<f64>, f64)> {
    let mut c = f.coeffs().to_vec();
    c.resize(c.len().max(degree + 1), ZERO);
    let padded = HoloSeries::new(c, f.radius())?;
    let s = solve_schwarz_within(&padded, (ZERO, ONE, ZERO), POLE_SEARCH_LIMIT)?;
    let a = (3..=degree).map(|m| s.w.coeff(m).norm()).collect();
    Ok((a, s.validity_radius))
}

/// For every member compare `|c_k|`, `k = 2..=n`, with `max(|c_1^0|, |c_k^0|)`
/// where `f0` maximizes `|c_1|` over the family (first seen on ties), and the
/// Taylor coefficients `a_m`, `m = 3..=n+2`, of the normalized solutions of
/// `S_w = f` with those of `f0`. Violations beyond `tol` are listed verbatim.
pub fn check_coefficient_bounds(family: &[HoloSeries], n: usize, tol: f64) -> Result<BoundsReport> {
    if n < 2 {
        return Err(Error::InvalidInput("coefficient bounds start at n = 2".into()));
    }
    let mut report = BoundsReport {
        header: BOUNDS_HEADER.into(),
        hypothesis: HYPOTHESIS_LABEL.into(),
        n,
        members: family.len(),
        f0_member: None,
        c1_0: 0.0,
        a_0: Vec::new(),
        rows: Vec::new(),
        not_univalent: Vec::new(),
        tol,
        violations: Vec::new(),
    };
    if family.is_empty() {
        return Ok(report);
    }
    let mut f0 = 0;
    for (i, f) in family.iter().enumerate() {
        if f.coeff(1).norm() > family[f0].coeff(1).norm() {
            f0 = i;
        }
    }
    let top = n + 2;
    let solutions: Vec<Result<(Vec<f64>, f64)>> = family.par_iter().map(|f| normalized_solution(f, top)).collect();
    let c0: Vec<f64> = (0..=n).map(|k| family[f0].coeff(k).norm()).collect();
    let (a0, r0) = solutions[f0].clone()?;
    report.f0_member = Some(f0);
    report.c1_0 = c0[1];
    let f0_univalent = r0 > 1.0;
    report.a_0 = if f0_univalent { a0.clone() } else { Vec::new() };
    for (i, (f, sol)) in family.iter().zip(solutions).enumerate() {
        let (a, radius) = sol?;
        let c_abs: Vec<f64> = (2..=n).map(|k| f.coeff(k).norm()).collect();
        let c_bound: Vec<f64> = (2..=n).map(|k| c0[1].max(c0[k])).collect();
        for (j, (&v, &b)) in c_abs.iter().zip(&c_bound).enumerate() {
            if v > b + tol {
                report.violations.push(Violation { member: i, kind: BoundKind::Coefficient, index: j + 2, value: v, bound: b, excess: v - b });
            }
        }
        let univalent = radius > 1.0;
        if !univalent {
            report.not_univalent.push(i);
        }
        if univalent && f0_univalent {
            for (j, (&v, &b)) in a.iter().zip(&a0).enumerate() {
                if v > b + tol {
                    report.violations.push(Violation { member: i, kind: BoundKind::Univalent, index: j + 3, value: v, bound: b, excess: v - b });
                }
            }
        }
        report.rows.push(MemberRow { member: i, c_abs, c_bound, a_abs: if univalent { a } else { Vec::new() }, validity_radius: radius });
    }
    Ok(report)
}

/// Random polynomial of degree `degree` rescaled to `‖f‖_{B_2} = norm` on `grid`.
pub fn random_b2_element(rng: &mut ChaCha8Rng, degree: usize, norm: f64, grid: BpGrid) -> Result<HoloSeries> {
    let coeffs: Vec<Complex64> = (0..=degree)
        .map(|_| Complex64::from_polar(rng.gen_range(0.0f64..1.0).sqrt(), rng.gen_range(-PI..PI)))
        .collect();
    let f = HoloSeries::new(coeffs, f64::INFINITY)?;
    let b2 = bp_norm(&f, 2.0, grid).value;
    if !(b2 > 0.0) {
        return Err(Error::InvalidInput("random element vanished".into()));
    }
    Ok(f.scale(Complex64::new(norm / b2, 0.0)))
}

/// The complex disk `{t f1 : |t| <= 1}` sampled at `t = 1` followed by
/// `members - 1` random points of the closed disk.
pub fn disk_family(f1: &HoloSeries, members: usize, rng: &mut ChaCha8Rng) -> Vec<HoloSeries> {
    (0..members)
        .map(|i| {
            let t = if i == 0 {
                ONE
            } else {
                Complex64::from_polar(rng.gen_range(0.0f64..1.0).sqrt(), rng.gen_range(-PI..PI))
            };
            f1.scale(t)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilySweep {
    pub header: String,
    pub hypothesis: String,
    pub families: usize,
    pub members_per_family: usize,
    pub b2_bound: f64,
    pub n: usize,
    pub seed: u64,
    pub tol: f64,
    pub coefficient_violations: usize,
    pub univalent_violations: usize,
    pub not_univalent_members: usize,
    /// Every violation, tagged with its family.
    pub violations: Vec<(usize, Violation)>,
}

/// [`check_coefficient_bounds`] over `families` complex disks through random
/// polynomials of degree at most 12 with `‖f1‖_{B_2} <= b2_bound`.
pub fn sweep_disk_families(
    families: usize,
    members: usize,
    b2_bound: f64,
    n: usize,
    tol: f64,
    seed: u64,
) -> Result<FamilySweep> {
    let grid = BpGrid { n_rad: 64, n_ang: 128 };
    let reports: Vec<Result<BoundsReport>> = (0..families)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let degree = rng.gen_range(2..=MAX_EXPONENT_DEGREE);
            let norm = b2_bound * rng.gen_range(0.1..1.0);
            let f1 = random_b2_element(&mut rng, degree, norm, grid)?;
            check_coefficient_bounds(&disk_family(&f1, members, &mut rng), n, tol)
        })
        .collect();
    let mut sweep = FamilySweep {
        header: BOUNDS_HEADER.into(),
        hypothesis: HYPOTHESIS_LABEL.into(),
        families,
        members_per_family: members,
        b2_bound,
        n,
        seed,
        tol,
        coefficient_violations: 0,
        univalent_violations: 0,
        not_univalent_members: 0,
        violations: Vec::new(),
    };
    for (k, r) in reports.into_iter().enumerate() {
        let r = r?;
        sweep.not_univalent_members += r.not_univalent.len();
        for v in r.violations {
            match v.kind {
                BoundKind::Coefficient => sweep.coefficient_violations += 1,
                BoundKind::Univalent => sweep.univalent_violations += 1,
            }
            sweep.violations.push((k, v));
        }
    }
    Ok(sweep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_budget_gives_empty_record() {
        let r = hsz_search(&SpaceSpec::hardy(), 0, 0, 1).unwrap();
        assert_eq!(r.best_value, 0.0);
        assert_eq!(r.samples, 0);
        assert!(r.best_f.is_none() && r.improvements.is_empty());
    }

    #[test]
    fn constant_term_search_reaches_one() {
        let r = hsz_search(&SpaceSpec::hardy(), 0, 2000, 3).unwrap();
        assert!((r.best_value - 1.0).abs() < 1e-6, "{}", r.best_value);
        assert!(r.best_value <= 1.0 + 1e-12);
        for imp in &r.improvements {
            assert!((imp.norm - 1.0).abs() <= 1e-10 && imp.min_modulus > 0.0, "{imp:?}");
        }
    }

    #[test]
    fn best_value_is_monotone_in_budget_and_deterministic() {
        let space = SpaceSpec::hardy();
        let small = hsz_search(&space, 1, 300, 11).unwrap();
        let large = hsz_search(&space, 1, 900, 11).unwrap();
        let again = hsz_search(&space, 1, 900, 11).unwrap();
        assert!(large.best_value >= small.best_value);
        assert_eq!(large.best_value, again.best_value);
        assert_eq!(large.improvements.len(), again.improvements.len());
        let vals: Vec<f64> = large.improvements.iter().map(|i| i.value).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn first_coefficient_beats_exponential_scan() {
        let space = SpaceSpec::hardy();
        // |c_1| of exp(tz)/‖exp(tz)‖ in H² is t / sqrt(I_0(2t))
        let scan = (1..=40).map(|k| exponential_scan_value(&space, 0.05 * k as f64).unwrap()).fold(0.0, f64::max);
        let bessel = |t: f64| (0..60).map(|k| t.powi(2 * k) / (1..=k).map(|i| (i * i) as f64).product::<f64>()).sum::<f64>();
        let t = 1.2;
        assert!((exponential_scan_value(&space, t).unwrap() - t / bessel(t).sqrt()).abs() < 1e-12);
        let r = hsz_search(&space, 1, 4000, 5).unwrap();
        assert!(r.best_value > 0.0);
        assert!(r.best_value >= 0.95 * scan, "{} vs scan {scan}", r.best_value);
        let f = r.best_f.unwrap();
        assert!((hilbert_norm(&space, &f).unwrap() - 1.0).abs() < 1e-10);
        assert!(min_modulus(&f) > 0.0);
    }

    #[test]
    fn ray_family_bounds_hold_with_endpoint_extremal() {
        let f1 = HoloSeries::from_real(&[0.02, 0.05, -0.03, 0.01, 0.04], f64::INFINITY).unwrap();
        let family: Vec<HoloSeries> = (0..=10).map(|k| f1.scale(Complex64::new(k as f64 / 10.0, 0.0))).collect();
        let r = check_coefficient_bounds(&family, 4, 1e-9).unwrap();
        assert_eq!(r.f0_member, Some(10));
        assert_eq!(r.rows.len(), 11);
        assert_eq!(r.coefficient_violations(), 0);
        assert!((r.rows[5].c_abs[0] - 0.5 * 0.03).abs() < 1e-15);
        assert_eq!(r.hypothesis, HYPOTHESIS_LABEL);
    }

    #[test]
    fn violations_are_reported_verbatim() {
        let a = HoloSeries::from_real(&[0.0, 0.1, 0.0], f64::INFINITY).unwrap();
        let b = HoloSeries::from_real(&[0.0, 0.05, 0.3], f64::INFINITY).unwrap();
        let r = check_coefficient_bounds(&[a, b], 2, 1e-9).unwrap();
        assert_eq!(r.f0_member, Some(0));
        assert_eq!(r.coefficient_violations(), 1);
        let v = &r.violations[0];
        assert_eq!((v.member, v.index), (1, 2));
        assert!((v.excess - 0.2).abs() < 1e-15);
    }

    #[test]
    fn empty_family_gives_empty_report() {
        let r = check_coefficient_bounds(&[], 3, 1e-9).unwrap();
        assert_eq!(r.members, 0);
        assert!(r.rows.is_empty() && r.violations.is_empty() && r.f0_member.is_none());
    }

    #[test]
    fn small_disk_families_show_no_coefficient_violation() {
        let s = sweep_disk_families(40, 8, 0.2, 6, 1e-9, 0).unwrap();
        assert_eq!(s.coefficient_violations, 0, "{:?}", s.violations);
        assert_eq!(s.not_univalent_members, 0);
    }
}
