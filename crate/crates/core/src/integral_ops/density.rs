use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use super::diskpoly::DiskPoly;
use super::Disk;
use crate::error::{Error, Result};
use crate::quadrature::{PolarGrid, QuadratureConfig};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Degree used when a density is converted to a [`DiskPoly`].
pub const DEFAULT_POLY_DEGREE: usize = 24;

/// A closed-form building block of a density on the support disk.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    /// The constant 1 on the disk.
    Indicator,
    /// `conj((ζ - pole)^{-order})`; the pole must lie outside the closed disk.
    ConjPhi { order: u32, pole: Complex64 },
    /// Polynomial in the normalized coordinate `u = (ζ - w0)/r`.
    Poly(DiskPoly),
}

impl Term {
    fn eval(&self, disk: &Disk, zeta: Complex64) -> Complex64 {
        match self {
            Term::Indicator => Complex64::new(1.0, 0.0),
            Term::ConjPhi { order, pole } => (zeta - pole).conj().powi(-(*order as i32)),
            Term::Poly(p) => p.eval(disk.normalize(zeta)),
        }
    }
}

/// A complex density supported on a disk: a linear combination of closed-form
/// terms, plus its samples on the polar quadrature grid.
#[derive(Debug, Clone)]
pub struct Density {
    disk: Disk,
    combo: Vec<(Complex64, Term)>,
    grid: Arc<PolarGrid>,
    values: Vec<Complex64>,
    sup_bound: f64,
    fit_residual: Option<f64>,
}

impl Density {
    pub fn new(disk: Disk, combo: Vec<(Complex64, Term)>, quad: QuadratureConfig) -> Result<Self> {
        let grid = Arc::new(PolarGrid::new(disk.center, disk.radius, quad));
        Self::on_grid(disk, combo, grid)
    }

    /// Like [`Density::new`] but reuses an existing grid of the same disk.
    pub fn on_grid(disk: Disk, combo: Vec<(Complex64, Term)>, grid: Arc<PolarGrid>) -> Result<Self> {
        for (c, t) in &combo {
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::InvalidInput("density coefficients must be finite".into()));
            }
            if let Term::ConjPhi { pole, .. } = t {
                if (pole - disk.center).norm() <= disk.radius {
                    return Err(Error::SingularKernel(format!(
                        "pole {pole} of a density term lies in the closed support disk"
                    )));
                }
            }
        }
        let mut d = Self { disk, combo, grid, values: Vec::new(), sup_bound: 0.0, fit_residual: None };
        d.values = d.grid.nodes.iter().map(|&z| d.eval(z)).collect();
        d.sup_bound = d.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        Ok(d)
    }

    pub fn zero(disk: Disk, quad: QuadratureConfig) -> Self {
        Self::new(disk, Vec::new(), quad).expect("empty combination is valid")
    }

    pub fn constant(disk: Disk, k: Complex64, quad: QuadratureConfig) -> Self {
        Self::new(disk, vec![(k, Term::Indicator)], quad).expect("indicator is valid")
    }

    /// `coeff * conj((ζ - pole)^{-order})`.
    pub fn conj_phi(disk: Disk, coeff: Complex64, order: u32, pole: Complex64, quad: QuadratureConfig) -> Result<Self> {
        Self::new(disk, vec![(coeff, Term::ConjPhi { order, pole })], quad)
    }

    pub fn poly(disk: Disk, p: DiskPoly, quad: QuadratureConfig) -> Self {
        Self::new(disk, vec![(Complex64::new(1.0, 0.0), Term::Poly(p))], quad).expect("polynomial is valid")
    }

    /// Density known only through its values on the quadrature grid; it is
    /// represented by its least-squares disk-polynomial fit of `degree`.
    pub fn from_grid(disk: Disk, quad: QuadratureConfig, values: &[Complex64], degree: usize) -> Result<Self> {
        let grid = Arc::new(PolarGrid::new(disk.center, disk.radius, quad));
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!("expected {} grid values, got {}", grid.len(), values.len())));
        }
        let u: Vec<_> = grid.nodes.iter().map(|&z| disk.normalize(z)).collect();
        let w: Vec<_> = grid.weights.iter().map(|w| w / (disk.radius * disk.radius)).collect();
        let (p, residual) = DiskPoly::fit(&u, values, &w, degree)?;
        let mut d = Self::on_grid(disk, vec![(Complex64::new(1.0, 0.0), Term::Poly(p))], grid)?;
        d.fit_residual = Some(residual);
        Ok(d)
    }

    /// `Σ s_i ρ_i` over densities on the same disk and grid; `ConjPhi` terms
    /// with equal order and pole are merged.
    pub fn linear_combination(parts: &[(Complex64, &Density)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidInput("empty linear combination".into()))?.1;
        let disk = first.disk;
        let mut phis: BTreeMap<(u32, u64, u64), (Complex64, Complex64)> = BTreeMap::new();
        let mut indicator = ZERO;
        let mut poly: Option<DiskPoly> = None;
        for (s, d) in parts {
            if d.disk != disk || d.grid.config != first.grid.config {
                return Err(Error::InvalidInput("densities live on different disks or grids".into()));
            }
            for (c, t) in &d.combo {
                let c = c * s;
                match t {
                    Term::Indicator => indicator += c,
                    Term::ConjPhi { order, pole } => {
                        let key = (*order, pole.re.to_bits(), pole.im.to_bits());
                        phis.entry(key).or_insert((ZERO, *pole)).0 += c;
                    }
                    Term::Poly(p) => match &mut poly {
                        Some(acc) => acc.add_scaled(p, c),
                        None => poly = Some(p.scale(c)),
                    },
                }
            }
        }
        let mut combo = Vec::new();
        if indicator != ZERO {
            combo.push((indicator, Term::Indicator));
        }
        for ((order, _, _), (c, pole)) in phis {
            if c != ZERO {
                combo.push((c, Term::ConjPhi { order, pole }));
            }
        }
        if let Some(p) = poly {
            combo.push((Complex64::new(1.0, 0.0), Term::Poly(p)));
        }
        Self::on_grid(disk, combo, first.grid.clone())
    }

    pub fn disk(&self) -> Disk {
        self.disk
    }

    pub fn combo(&self) -> &[(Complex64, Term)] {
        &self.combo
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub(crate) fn grid_arc(&self) -> Arc<PolarGrid> {
        self.grid.clone()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Largest modulus over the grid nodes, the `L∞` surrogate.
    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    /// Weighted RMS misfit when the density was fitted from grid samples.
    pub fn fit_residual(&self) -> Option<f64> {
        self.fit_residual
    }

    pub fn is_zero(&self) -> bool {
        self.combo.iter().all(|(c, t)| *c == ZERO || matches!(t, Term::Poly(p) if p.is_zero()))
    }

    /// Value of the closed-form combination at `zeta` (meaningful on the disk).
    pub fn eval(&self, zeta: Complex64) -> Complex64 {
        self.combo.iter().map(|(c, t)| c * t.eval(&self.disk, zeta)).sum()
    }

    /// Value extended by zero outside the support disk.
    pub fn eval_extended(&self, zeta: Complex64) -> Complex64 {
        if self.disk.contains(zeta) {
            self.eval(zeta)
        } else {
            ZERO
        }
    }

    /// Disk-polynomial expansion of degree `degree` and a bound on the
    /// truncation error of the `ConjPhi` terms.
    pub fn to_disk_poly(&self, degree: usize) -> Result<(DiskPoly, f64)> {
        let mut out = DiskPoly::zero(degree);
        let mut tail = 0.0;
        for (c, t) in &self.combo {
            match t {
                Term::Indicator => out.add_scaled(&DiskPoly::constant(*c, 0), Complex64::new(1.0, 0.0)),
                Term::ConjPhi { order, pole } => {
                    let (p, err) = DiskPoly::conj_phi(*order, *pole, self.disk.center, self.disk.radius, degree)?;
                    out.add_scaled(&p, *c);
                    tail += c.norm() * err;
                }
                Term::Poly(p) => out.add_scaled(p, *c),
            }
        }
        Ok((out, tail))
    }

    /// True when every term is a function of `conj(ζ)` alone, in which case
    /// the Beurling transform vanishes on the disk.
    pub fn is_antiholomorphic(&self) -> bool {
        self.combo.iter().all(|(_, t)| match t {
            Term::Indicator | Term::ConjPhi { .. } => true,
            Term::Poly(p) => p.is_antiholomorphic(),
        })
    }
}
