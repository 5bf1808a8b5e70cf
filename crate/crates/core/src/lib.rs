//! Numerical toolkit for norm-preserving quasiconformal deformations of
//! holomorphic functions on the unit disk.
//!
//! The crate is organised bottom-up:
//!
//! * [`series`]: truncated power series arithmetic and coefficient recovery.
//! * [`spaces`]: Hilbert norms with diagonal or radial weights and the
//!   weighted sup-norms `B_p`.
//! * [`integral_ops`]: Cauchy and Beurling transforms over a disk.
//! * [`beltrami`]: Neumann-series solution of the Beltrami equation.
//! * [`deform`]: the deformation engine that hits prescribed Taylor
//!   coefficients and a prescribed norm.
//! * [`schwarzian`], [`approx`], [`extremal`]: Schwarzian correspondence,
//!   double-pole rational fitting and coefficient-problem search harnesses.

// `!(x > 0.0)` guards deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod beltrami;
pub mod config;
pub mod deform;
pub mod error;
pub mod extremal;
pub mod integral_ops;
pub mod quadrature;
pub mod schwarzian;
pub mod series;
pub mod spaces;

pub use num_complex::Complex64;

pub use crate::beltrami::{build_map, solve_neumann, verify_map, MapVerification, NeumannSolution, QcMap};
pub use crate::config::RunConfig;
pub use crate::deform::{DeformationProblem, DeformationResult};
pub use crate::error::{Error, Result};
pub use crate::integral_ops::{Density, Disk, Term};
pub use crate::quadrature::QuadratureConfig;
pub use crate::series::HoloSeries;
pub use crate::spaces::SpaceSpec;
