//! Dirichlet-to-Neumann route: differentiate the harmonic extension in the normal direction.

use crate::error::{Error, Result};
use crate::fractional::spectral::{poisson_extend, SpectralPlan};
use crate::grid::Field;

/// Extension heights used when the caller does not choose any.
pub const DEFAULT_Y_LEVELS: [f64; 2] = [5e-4, 1e-3];

pub(crate) fn validate_levels(y_levels: &[f64]) -> Result<()> {
    if y_levels.is_empty() {
        return Err(Error::InvalidParameter("empty y_levels".into()));
    }
    if y_levels[0] < 1e-6 || y_levels.iter().any(|y| !y.is_finite()) {
        return Err(Error::InvalidParameter(format!("smallest y level {} below 1e-6", y_levels[0])));
    }
    if y_levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("y_levels must be strictly increasing".into()));
    }
    Ok(())
}

/// Polynomial extrapolation of samples `(y_j, d_j)` to `y = 0` (Neville).
pub(crate) fn extrapolate_to_zero(ys: &[f64], mut table: Vec<Vec<f64>>) -> Vec<f64> {
    let k = ys.len();
    for width in 1..k {
        for i in 0..k - width {
            let j = i + width;
            let (yi, yj) = (ys[i], ys[j]);
            let next: Vec<f64> = table[i]
                .iter()
                .zip(&table[i + 1])
                .map(|(&lo, &hi)| (yj * lo - yi * hi) / (yj - yi))
                .collect();
            table[i] = next;
        }
    }
    table.swap_remove(0)
}

/// Estimate of `-d/dy E(u)(x, 0)` from one-sided differences `(u - E_y u) / y`
/// at each level, Richardson-extrapolated to `y = 0`.
pub fn dtn_finite_difference(u: &Field, y_levels: &[f64], plan: &SpectralPlan) -> Result<Field> {
    validate_levels(y_levels)?;
    let mut table = Vec::with_capacity(y_levels.len());
    for &y in y_levels {
        let e = poisson_extend(u, y, plan)?;
        table.push(u.values().iter().zip(e.values()).map(|(a, b)| (a - b) / y).collect());
    }
    Ok(Field::from_raw(*u.grid(), extrapolate_to_zero(y_levels, table)))
}

/// Effective Fourier symbol of [`dtn_finite_difference`] at frequency magnitude `k`.
pub(crate) fn dtn_symbol(y_levels: &[f64], k: f64) -> f64 {
    let table = y_levels.iter().map(|&y| vec![-(-y * k).exp_m1() / y]).collect();
    extrapolate_to_zero(y_levels, table)[0]
}
