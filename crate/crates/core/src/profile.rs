//! Catalogue of analytic data that can be sampled onto a grid.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};

/// `C_N = pi^{-(N+1)/2} Gamma((N+1)/2)`, the normalization of the half-Laplacian kernel.
pub fn riesz_constant(dim: usize) -> f64 {
    let a = (dim as f64 + 1.0) / 2.0;
    PI.powf(-a) * statrs::function::gamma::gamma(a)
}

/// Analytic descriptors accepted by [`sample`].
///
/// All radial profiles are measured from `center` (default: origin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    /// `amplitude * exp(-|x-c|^2 / (2 sigma^2))`, equal to `amplitude` at the center.
    Gaussian {
        sigma: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// Smooth compactly supported bump `amplitude * exp(1 - 1/(1 - (r/radius)^2))`.
    Bump {
        radius: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// `amplitude` on the closed ball of the given radius, zero elsewhere.
    Indicator {
        radius: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// `C_N y / (|x|^2 + y^2)^{(N+1)/2}`.
    PoissonKernel {
        y: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// `amplitude * (tau^2 + |x-c|^2)^{-(N+1)/2}`.
    SeparableProfile {
        tau: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    Constant {
        value: f64,
    },
    /// `cos(k pi x / L) * cos(k2 pi y / L)`; the second factor only in two dimensions.
    CosineMode {
        k: i64,
        #[serde(default)]
        k2: i64,
    },
}

fn one() -> f64 {
    1.0
}

impl Profile {
    /// Builds a descriptor from a name and a flat parameter table.
    pub fn from_parts(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |key: &str| {
            params
                .get(key)
                .copied()
                .ok_or_else(|| Error::InvalidParameter(format!("{name}: missing `{key}`")))
        };
        let opt = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
        let center = [opt("cx", 0.0), opt("cy", 0.0)];
        let p = match name {
            "gaussian" => Profile::Gaussian { sigma: get("sigma")?, amplitude: opt("amplitude", 1.0), center },
            "bump" => Profile::Bump { radius: get("radius")?, amplitude: opt("amplitude", 1.0), center },
            "indicator" => Profile::Indicator { radius: get("radius")?, amplitude: opt("amplitude", 1.0), center },
            "poisson-kernel" => Profile::PoissonKernel { y: get("y")?, center },
            "separable-profile" => {
                Profile::SeparableProfile { tau: get("tau")?, amplitude: opt("amplitude", 1.0), center }
            }
            "constant" => Profile::Constant { value: get("value")? },
            "cosine-mode" => Profile::CosineMode { k: get("k")? as i64, k2: opt("k2", 0.0) as i64 },
            other => return Err(Error::UnknownProfile(other.to_string())),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be finite")))
            }
        };
        match *self {
            Profile::Gaussian { sigma, amplitude, .. } => {
                positive("sigma", sigma)?;
                finite("amplitude", amplitude)
            }
            Profile::Bump { radius, amplitude, .. } | Profile::Indicator { radius, amplitude, .. } => {
                positive("radius", radius)?;
                finite("amplitude", amplitude)
            }
            Profile::PoissonKernel { y, .. } => positive("y", y),
            Profile::SeparableProfile { tau, amplitude, .. } => {
                positive("tau", tau)?;
                finite("amplitude", amplitude)
            }
            Profile::Constant { value } => finite("value", value),
            Profile::CosineMode { .. } => Ok(()),
        }
    }

    /// Pointwise evaluation on a grid of dimension `dim` and half-width `half_width`.
    pub fn eval(&self, x: [f64; 2], dim: usize, half_width: f64) -> f64 {
        let dist2 = |c: [f64; 2]| {
            let dx = x[0] - c[0];
            let dy = if dim == 2 { x[1] - c[1] } else { 0.0 };
            dx * dx + dy * dy
        };
        let nd = dim as f64;
        match *self {
            Profile::Gaussian { sigma, amplitude, center } => {
                amplitude * (-dist2(center) / (2.0 * sigma * sigma)).exp()
            }
            Profile::Bump { radius, amplitude, center } => {
                let s = dist2(center) / (radius * radius);
                if s < 1.0 {
                    amplitude * (1.0 - 1.0 / (1.0 - s)).exp()
                } else {
                    0.0
                }
            }
            Profile::Indicator { radius, amplitude, center } => {
                if dist2(center) <= radius * radius {
                    amplitude
                } else {
                    0.0
                }
            }
            Profile::PoissonKernel { y, center } => {
                riesz_constant(dim) * y / (dist2(center) + y * y).powf((nd + 1.0) / 2.0)
            }
            Profile::SeparableProfile { tau, amplitude, center } => {
                amplitude * (tau * tau + dist2(center)).powf(-(nd + 1.0) / 2.0)
            }
            Profile::Constant { value } => value,
            Profile::CosineMode { k, k2 } => {
                let w = PI / half_width;
                let first = (k as f64 * w * x[0]).cos();
                if dim == 2 {
                    first * (k2 as f64 * w * x[1]).cos()
                } else {
                    first
                }
            }
        }
    }
}

/// Samples `profile` at every lattice point.
pub fn sample(grid: &GridSpec, profile: &Profile) -> Result<Field> {
    profile.validate()?;
    let (dim, l) = (grid.dim(), grid.half_width());
    Field::from_fn(*grid, |x| profile.eval(x, dim, l))
}
