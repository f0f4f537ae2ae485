//! Uniform lattices on the truncated box `[-L, L)^N` and the fields sampled on them.
//!
//! All integrals are rectangle sums `h^N * sum(values)`. On the periodic lattice this
//! rule is exact for trigonometric polynomials, and it keeps every discrete identity
//! (mass, positive parts, inner products) exact up to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncated lattice `x_i = -L + i h`, `h = 2L / n`, in one or two dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    half_width: f64,
    points_per_dim: usize,
}

impl GridSpec {
    pub fn new(dim: usize, half_width: f64, points_per_dim: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("half-width {half_width} must be positive")));
        }
        if points_per_dim < 2 || points_per_dim % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per dimension {points_per_dim} must be even and at least 2"
            )));
        }
        Ok(Self { dim, half_width, points_per_dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_dim as f64
    }

    /// Total number of lattice points, `n^N`.
    pub fn len(&self) -> usize {
        self.points_per_dim.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^N`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Lebesgue measure of the box, `(2L)^N`.
    pub fn box_measure(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    /// One-dimensional coordinate of lattice index `i`.
    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Coordinates of the flat (row-major) index. Unused components are zero.
    pub fn point(&self, flat: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.coordinate(flat), 0.0],
            _ => {
                let n = self.points_per_dim;
                [self.coordinate(flat / n), self.coordinate(flat % n)]
            }
        }
    }

    /// Euclidean norm of the point with the given flat index.
    pub fn radius(&self, flat: usize) -> f64 {
        let p = self.point(flat);
        (p[0] * p[0] + p[1] * p[1]).sqrt()
    }

    /// Flat indices of points with every coordinate in `[-r, r]`.
    pub fn indices_within(&self, r: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| {
                let p = self.point(i);
                p[..self.dim].iter().all(|c| c.abs() <= r + 1e-12)
            })
            .collect()
    }

    /// Same lattice with a different resolution.
    pub fn with_points(&self, points_per_dim: usize) -> Result<Self> {
        Self::new(self.dim, self.half_width, points_per_dim)
    }
}

/// Exponent of an L^p norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LpExponent {
    Finite(f64),
    Infinity,
}

/// The "odd power" `v -> sign(v) |v|^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OddPowerSpec {
    exponent: f64,
}

impl OddPowerSpec {
    pub fn new(exponent: f64) -> Result<Self> {
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(Error::InvalidParameter(format!("odd power exponent {exponent}")));
        }
        Ok(Self { exponent })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn inverse(&self) -> Self {
        Self { exponent: 1.0 / self.exponent }
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        odd_pow(v, self.exponent)
    }
}

#[inline]
pub(crate) fn odd_pow(v: f64, p: f64) -> f64 {
    if p == 1.0 {
        v
    } else if v == 0.0 {
        0.0
    } else {
        v.signum() * v.abs().powf(p)
    }
}

/// Real samples on a [`GridSpec`], row-major over the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    /// Skips the finiteness scan; callers guarantee the invariant.
    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `h^N * sum(values)`.
    pub fn mass(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    pub fn lp_norm(&self, p: LpExponent) -> Result<f64> {
        match p {
            LpExponent::Infinity => Ok(self.sup_norm()),
            LpExponent::Finite(p) if p >= 1.0 && p.is_finite() => Ok(self.lp_norm_unchecked(p)),
            LpExponent::Finite(p) => Err(Error::InvalidParameter(format!("L^p exponent {p} < 1"))),
        }
    }

    pub(crate) fn lp_norm_unchecked(&self, p: f64) -> f64 {
        let s: f64 = if p == 1.0 {
            self.values.iter().map(|v| v.abs()).sum()
        } else if p == 2.0 {
            self.values.iter().map(|v| v * v).sum()
        } else {
            self.values.iter().map(|v| v.abs().powf(p)).sum()
        };
        (self.grid.cell_volume() * s).powf(1.0 / p)
    }

    /// `h^N * sum |v|^p` without the root.
    pub fn lp_integral(&self, p: f64) -> f64 {
        self.grid.cell_volume() * self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>()
    }

    pub fn l1_norm(&self) -> f64 {
        self.lp_norm_unchecked(1.0)
    }

    pub fn l2_norm(&self) -> f64 {
        self.lp_norm_unchecked(2.0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn odd_power(&self, p: OddPowerSpec) -> Field {
        self.map(|v| p.apply(v))
    }

    /// `h^N * sum max(v, 0)`.
    pub fn positive_part_l1(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().map(|v| v.max(0.0)).sum::<f64>()
    }

    /// Discrete inner product `h^N * sum u v`.
    pub fn dot(&self, other: &Field) -> Result<f64> {
        self.ensure_same_grid(other)?;
        Ok(self.grid.cell_volume() * dot(&self.values, &other.values))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.ensure_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field::from_raw(self.grid, values))
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// L^1 distance `h^N * sum |u - v|`.
    pub fn l1_distance(&self, other: &Field) -> Result<f64> {
        self.ensure_same_grid(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum();
        Ok(self.grid.cell_volume() * s)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
