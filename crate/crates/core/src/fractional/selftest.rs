//! Cross-validation battery for the three backends on a configured grid.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fractional::dtn::dtn_finite_difference;
use crate::fractional::riesz::{half_laplacian_riesz, RieszPlan};
use crate::fractional::spectral::{half_laplacian_spectral, SpectralPlan};
use crate::fractional::OperatorOptions;
use crate::grid::{Field, GridSpec};
use crate::profile::{sample, Profile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTestEntry {
    pub name: String,
    pub relative_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTestReport {
    pub grid: GridSpec,
    pub entries: Vec<SelfTestEntry>,
    pub pass: bool,
}

/// `max_{i in idx} |a_i - b_i| / max_{i in idx} |b_i|`.
pub fn relative_linf_on(a: &Field, b: &Field, idx: &[usize]) -> f64 {
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for &i in idx {
        err = err.max((a.values()[i] - b.values()[i]).abs());
        scale = scale.max(b.values()[i].abs());
    }
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

/// Far field of the half Laplacian of `exp(-x^2/2)` on the line,
/// `-sqrt(2/pi) sum_k (2k-1)!!/x^{2k}`, truncated at seven terms. Accurate for `|x| >= 15`.
pub fn gaussian_far_field(x: f64) -> f64 {
    let inv = 1.0 / (x * x);
    let (mut term, mut sum) = (1.0, 0.0);
    for k in 1..=7 {
        term *= (2 * k - 1) as f64 * inv;
        sum += term;
    }
    -(2.0 / PI).sqrt() * sum
}

/// Contribution of the periodic copies of a unit gaussian to the spectral half Laplacian
/// on a 1D torus, summed over `images` copies on each side.
pub fn gaussian_periodic_images(grid: &GridSpec, images: usize) -> Result<Field> {
    let period = 2.0 * grid.half_width();
    Field::from_fn(*grid, |x| {
        (1..=images)
            .rev()
            .map(|j| {
                let s = j as f64 * period;
                gaussian_far_field(x[0] + s) + gaussian_far_field(x[0] - s)
            })
            .sum()
    })
}

fn entry(name: impl Into<String>, relative_error: f64, tolerance: f64) -> SelfTestEntry {
    SelfTestEntry { name: name.into(), relative_error, tolerance, pass: relative_error <= tolerance }
}

/// Runs the operator battery: cosine eigenmodes, constants, and gaussian cross-checks
/// between the spectral, Riesz and Dirichlet-to-Neumann routes on the inner half box.
pub fn operator_selftest(grid: &GridSpec, options: &OperatorOptions) -> Result<SelfTestReport> {
    let spectral = SpectralPlan::new(grid);
    let riesz = RieszPlan::new(grid, options.riesz_correction);
    let l = grid.half_width();
    let all: Vec<usize> = (0..grid.len()).collect();
    let mut entries = Vec::new();

    let kmax = (grid.points_per_dim() / 2 - 1).min(8) as i64;
    for k in 1..=kmax {
        let u = sample(grid, &Profile::CosineMode { k, k2: 0 })?;
        let lu = half_laplacian_spectral(&u, &spectral)?;
        let exact = u.scale(k as f64 * PI / l);
        entries.push(entry(format!("spectral-cosine-k{k}"), relative_linf_on(&lu, &exact, &all), 1e-12));
    }

    let c = Field::constant(*grid, 1.0);
    entries.push(entry("spectral-constant", half_laplacian_spectral(&c, &spectral)?.sup_norm(), 1e-12));

    let inner = grid.indices_within(l / 2.0);
    let gauss = sample(grid, &Profile::Gaussian { sigma: 1.0, amplitude: 1.0, center: [0.0; 2] })?;
    let ls = half_laplacian_spectral(&gauss, &spectral)?;
    let lr = half_laplacian_riesz(&gauss, &riesz)?;
    let ld = dtn_finite_difference(&gauss, &options.dtn_levels, &spectral)?;
    entries.push(entry("gaussian-riesz-vs-spectral", relative_linf_on(&lr, &ls, &inner), 0.02));
    entries.push(entry("gaussian-dtn-vs-spectral", relative_linf_on(&ld, &ls, &inner), 5e-3));

    if grid.dim() == 1 {
        // (1/pi)/(1+x^2) has image (1/pi)(1-x^2)/(1+x^2)^2
        let p = Field::from_fn(*grid, |x| 1.0 / PI / (1.0 + x[0] * x[0]))?;
        let lp = half_laplacian_riesz(&p, &riesz)?;
        let exact = Field::from_fn(*grid, |x| {
            let s = x[0] * x[0];
            (1.0 - s) / (1.0 + s).powi(2) / PI
        })?;
        let window = grid.indices_within((l / 4.0).min(10.0));
        if l >= 15.0 {
            let unwrapped = ls.sub(&gaussian_periodic_images(grid, 20_000)?)?;
            entries.push(entry("gaussian-riesz-vs-unwrapped-spectral", relative_linf_on(&lr, &unwrapped, &inner), 1e-3));
        }
        entries.push(entry("poisson-image-riesz", relative_linf_on(&lp, &exact, &window), 0.02));
    }

    let pass = entries.iter().all(|e| e.pass);
    Ok(SelfTestReport { grid: *grid, entries, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_passes() {
        let g = GridSpec::new(1, 20.0, 512).unwrap();
        let r = operator_selftest(&g, &OperatorOptions::default()).unwrap();
        for e in &r.entries {
            assert!(e.pass, "{e:?}");
        }
    }

    #[test]
    fn far_field_matches_quadrature() {
        // away from the bump, Lambda f(x) = -(1/pi) int f(y)/(x-y)^2 dy
        for x in [15.0, 20.0, 40.0] {
            let n = 20_000;
            let h = 24.0 / n as f64;
            let q: f64 = (0..=n)
                .map(|i| {
                    let y = -12.0 + i as f64 * h;
                    let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                    w * (-y * y / 2.0).exp() / (x - y).powi(2)
                })
                .sum::<f64>()
                * h;
            let oracle = -q / PI;
            let rel = (gaussian_far_field(x) - oracle).abs() / oracle.abs();
            assert!(rel < 1e-6, "x={x}: {rel}");
        }
    }

    #[test]
    fn unwrapped_spectral_refines() {
        let mut errs = Vec::new();
        for n in [512, 2048] {
            let g = GridSpec::new(1, 20.0, n).unwrap();
            let r = operator_selftest(&g, &OperatorOptions::default()).unwrap();
            let e = r.entries.iter().find(|e| e.name == "gaussian-riesz-vs-unwrapped-spectral").unwrap();
            errs.push(e.relative_error);
        }
        assert!(errs[1] < errs[0] / 10.0, "{errs:?}");
    }

    #[test]
    fn tiny_grid_fails() {
        let g = GridSpec::new(1, 20.0, 8).unwrap();
        let r = operator_selftest(&g, &OperatorOptions::default()).unwrap();
        assert!(!r.pass);
        assert!(r.entries.iter().any(|e| e.name == "gaussian-riesz-vs-spectral" && !e.pass));
    }
}
