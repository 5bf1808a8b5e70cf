//! Fixtures shared by the benchmarks.

use qcdeform_core::integral_ops::DiskPoly;
use qcdeform_core::{Complex64, Density, Disk, QuadratureConfig};

/// The disk used throughout the benchmarks.
pub fn bench_disk() -> Disk {
    Disk::new(Complex64::new(3.0, 0.0), 0.3).expect("valid disk")
}

/// A smooth non-antiholomorphic density of small sup norm.
pub fn smooth_density(quad: QuadratureConfig) -> Density {
    let mut p = DiskPoly::zero(3);
    p.set(0, 0, Complex64::new(0.02, 0.01));
    p.set(1, 0, Complex64::new(0.05, 0.0));
    p.set(1, 2, Complex64::new(0.0, -0.03));
    Density::poly(bench_disk(), p, quad)
}
