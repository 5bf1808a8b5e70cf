//! Run configuration shared by every module and embedded in every report.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::QuadratureConfig;
use crate::series::{DEFAULT_DEGREE, DEFAULT_SAMPLE_RADIUS};
use crate::spaces::{SpaceSpec, DEFAULT_NORM_DEGREE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// Circle on which composed maps are sampled for coefficient recovery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub rho: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub coeff: f64,
    pub norm: f64,
    pub neumann: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { coeff: 1e-8, norm: 1e-7, neumann: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub degree: usize,
    pub norm_degree: usize,
    pub quadrature: QuadratureConfig,
    pub sampling: Sampling,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub space: SpaceSpec,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            degree: DEFAULT_DEGREE,
            norm_degree: DEFAULT_NORM_DEGREE,
            quadrature: QuadratureConfig::default(),
            sampling: Sampling { rho: DEFAULT_SAMPLE_RADIUS, points: 4 * DEFAULT_NORM_DEGREE },
            tolerances: Tolerances::default(),
            seed: 0,
            space: SpaceSpec::hardy(),
            format: OutputFormat::Json,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        if !(t.coeff > 0.0 && t.norm > 0.0 && t.neumann > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if self.degree == 0 || self.norm_degree == 0 {
            return Err(Error::InvalidInput("series and norm degrees must be at least 1".into()));
        }
        let m = self.sampling.points;
        if !m.is_power_of_two() || m < 4 * self.degree {
            return Err(Error::InvalidInput(format!(
                "sample count {m} must be a power of two and at least 4 x degree {}",
                self.degree
            )));
        }
        if !(self.sampling.rho > 0.0 && self.sampling.rho < 1.0) {
            return Err(Error::InvalidInput("sampling radius must lie in (0, 1)".into()));
        }
        if self.quadrature.n_rad == 0 || self.quadrature.n_ang == 0 {
            return Err(Error::InvalidInput("quadrature resolution must be positive".into()));
        }
        Ok(())
    }

    /// Sample count large enough to resolve the norm truncation.
    pub fn norm_samples(&self) -> usize {
        self.sampling.points.max((4 * self.norm_degree).next_power_of_two())
    }
}
