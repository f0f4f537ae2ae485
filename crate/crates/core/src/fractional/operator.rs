use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractional::dtn::{dtn_symbol, validate_levels, DEFAULT_Y_LEVELS};
use crate::fractional::riesz::{RieszPlan, SingularCorrection};
use crate::fractional::spectral::SpectralPlan;
use crate::grid::{dot, Field, GridSpec};

/// Which realization of the half-Laplacian drives a computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Backend {
    #[serde(rename = "spectral")]
    Spectral,
    #[serde(rename = "riesz")]
    Riesz,
    #[serde(rename = "dtn")]
    ExtensionDtN,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Spectral => "spectral",
            Backend::Riesz => "riesz",
            Backend::ExtensionDtN => "dtn",
        }
    }

    /// Whether the operator annihilates constants (periodic truncation).
    pub fn conserves_mass(&self) -> bool {
        !matches!(self, Backend::Riesz)
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Backend::Spectral),
            "riesz" => Ok(Backend::Riesz),
            "dtn" => Ok(Backend::ExtensionDtN),
            other => Err(Error::UnknownBackend(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorOptions {
    #[serde(default)]
    pub riesz_correction: SingularCorrection,
    #[serde(default = "default_levels")]
    pub dtn_levels: Vec<f64>,
}

fn default_levels() -> Vec<f64> {
    DEFAULT_Y_LEVELS.to_vec()
}

impl Default for OperatorOptions {
    fn default() -> Self {
        Self { riesz_correction: SingularCorrection::default(), dtn_levels: default_levels() }
    }
}

/// A half-Laplacian bound to a grid and a backend.
///
/// The spectral plan is always built: it provides the frequency-space preconditioner
/// for every backend.
#[derive(Debug, Clone)]
pub struct HalfLaplacian {
    backend: Backend,
    spectral: SpectralPlan,
    riesz: Option<RieszPlan>,
    dtn_multiplier: Option<Vec<f64>>,
}

impl HalfLaplacian {
    pub fn new(grid: &GridSpec, backend: Backend, options: &OperatorOptions) -> Result<Self> {
        let spectral = SpectralPlan::new(grid);
        let riesz = match backend {
            Backend::Riesz => Some(RieszPlan::new(grid, options.riesz_correction)),
            _ => None,
        };
        let dtn_multiplier = match backend {
            Backend::ExtensionDtN => {
                validate_levels(&options.dtn_levels)?;
                Some(spectral.multiplier().iter().map(|&k| dtn_symbol(&options.dtn_levels, k)).collect())
            }
            _ => None,
        };
        Ok(Self { backend, spectral, riesz, dtn_multiplier })
    }

    pub fn spectral_default(grid: &GridSpec) -> Self {
        Self { backend: Backend::Spectral, spectral: SpectralPlan::new(grid), riesz: None, dtn_multiplier: None }
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn grid(&self) -> &GridSpec {
        self.spectral.grid()
    }

    pub fn spectral(&self) -> &SpectralPlan {
        &self.spectral
    }

    pub fn riesz(&self) -> Option<&RieszPlan> {
        self.riesz.as_ref()
    }

    pub(crate) fn apply_raw(&self, values: &[f64]) -> Vec<f64> {
        match (&self.riesz, &self.dtn_multiplier) {
            (Some(r), _) => r.apply_raw(values),
            (_, Some(m)) => self.spectral.transform().apply_multiplier(values, m),
            _ => self.spectral.apply_raw(values),
        }
    }

    pub fn apply(&self, u: &Field) -> Result<Field> {
        if u.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(Field::from_raw(*u.grid(), self.apply_raw(u.values())))
    }

    /// `h^N <w, Lambda w>`.
    pub fn quadratic_form(&self, w: &Field) -> Result<f64> {
        if w.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(match self.backend {
            Backend::Spectral => self.spectral.seminorm_sq_raw(w.values()),
            _ => self.grid().cell_volume() * dot(w.values(), &self.apply_raw(w.values())),
        })
    }

    /// Diagonal of the discrete operator.
    pub(crate) fn diagonal(&self) -> Vec<f64> {
        let len = self.grid().len();
        let mean = |m: &[f64]| m.iter().sum::<f64>() / m.len() as f64;
        match (&self.riesz, &self.dtn_multiplier) {
            (Some(r), _) => r.diagonal(),
            (_, Some(m)) => vec![mean(m); len],
            _ => vec![mean(self.spectral.multiplier()); len],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backend_names_round_trip() {
        for b in [Backend::Spectral, Backend::Riesz, Backend::ExtensionDtN] {
            assert_eq!(b.name().parse::<Backend>().unwrap(), b);
        }
        assert!(matches!("fourier".parse::<Backend>(), Err(Error::UnknownBackend(_))));
    }

    #[test]
    fn quadratic_forms_are_consistent() {
        let g = GridSpec::new(1, 4.0, 32).unwrap();
        let w = Field::from_fn(g, |x| (-x[0] * x[0]).exp()).unwrap();
        for b in [Backend::Spectral, Backend::Riesz, Backend::ExtensionDtN] {
            let op = HalfLaplacian::new(&g, b, &OperatorOptions::default()).unwrap();
            let q = op.quadratic_form(&w).unwrap();
            let direct = w.dot(&op.apply(&w).unwrap()).unwrap();
            assert!((q - direct).abs() < 1e-10 * q.abs(), "{b}");
            assert!(q > 0.0);
        }
    }

    #[test]
    fn spectral_diagonal_matches_unit_probe() {
        let g = GridSpec::new(1, 2.0, 16).unwrap();
        let op = HalfLaplacian::spectral_default(&g);
        let mut e = vec![0.0; 16];
        e[5] = 1.0;
        assert!((op.apply_raw(&e)[5] - op.diagonal()[5]).abs() < 1e-12);
    }
}
