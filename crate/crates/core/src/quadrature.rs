//! Gauss-Legendre rules and the polar tensor grid used for area integrals
//! over a disk.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        self.on_interval(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Resolution of the polar tensor rule: Gauss-Legendre in the radius times
/// the trapezoid rule in the angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub n_rad: usize,
    pub n_ang: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { n_rad: 48, n_ang: 128 }
    }
}

impl QuadratureConfig {
    pub fn refined(self) -> Self {
        Self { n_rad: 2 * self.n_rad, n_ang: 2 * self.n_ang }
    }
}

/// Polar tensor grid over the disk `|z - center| < radius`. Weights include
/// the area element `s ds dθ`.
#[derive(Debug, Clone)]
pub struct PolarGrid {
    pub nodes: Vec<Complex64>,
    pub weights: Vec<f64>,
    pub config: QuadratureConfig,
}

impl PolarGrid {
    pub fn new(center: Complex64, radius: f64, config: QuadratureConfig) -> Self {
        let gl = GaussLegendre::new(config.n_rad);
        let dtheta = 2.0 * PI / config.n_ang as f64;
        let mut nodes = Vec::with_capacity(config.n_rad * config.n_ang);
        let mut weights = Vec::with_capacity(config.n_rad * config.n_ang);
        for (s, ws) in gl.on_interval(0.0, radius) {
            for j in 0..config.n_ang {
                let theta = j as f64 * dtheta;
                nodes.push(center + Complex64::from_polar(s, theta));
                weights.push(ws * s * dtheta);
            }
        }
        Self { nodes, weights, config }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}
