//! Fourier-multiplier realization of `(-Delta)^{1/2}` on the periodic box.

use crate::error::{Error, Result};
use crate::fft::Transform;
use crate::grid::{Field, GridSpec};

/// Symbol `|xi_k|` on the periodic lattice, with `xi_k = (pi / L) k` over the
/// symmetric integer range `k in [-n/2, n/2)`.
#[derive(Debug, Clone)]
pub struct SpectralPlan {
    grid: GridSpec,
    multiplier: Vec<f64>,
    transform: Transform,
}

/// Signed integer frequency of FFT slot `i` on an `n`-point axis.
pub(crate) fn frequency_index(i: usize, n: usize) -> f64 {
    if i < n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

impl SpectralPlan {
    pub fn new(grid: &GridSpec) -> Self {
        let n = grid.points_per_dim();
        let w = std::f64::consts::PI / grid.half_width();
        let multiplier = match grid.dim() {
            1 => (0..n).map(|i| w * frequency_index(i, n).abs()).collect(),
            _ => (0..n * n)
                .map(|i| {
                    let (a, b) = (frequency_index(i / n, n), frequency_index(i % n, n));
                    w * (a * a + b * b).sqrt()
                })
                .collect(),
        };
        Self { grid: *grid, multiplier, transform: Transform::new(n, grid.dim()) }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn multiplier(&self) -> &[f64] {
        &self.multiplier
    }

    pub(crate) fn transform(&self) -> &Transform {
        &self.transform
    }

    fn check(&self, u: &Field) -> Result<()> {
        if *u.grid() == self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Applies `s(|xi|)` for an arbitrary real symbol `s`.
    pub fn apply_symbol(&self, values: &[f64], symbol: impl Fn(f64) -> f64) -> Vec<f64> {
        let s: Vec<f64> = self.multiplier.iter().map(|&k| symbol(k)).collect();
        self.transform.apply_multiplier(values, &s)
    }

    pub(crate) fn apply_raw(&self, values: &[f64]) -> Vec<f64> {
        self.transform.apply_multiplier(values, &self.multiplier)
    }

    /// `(I * shift + scale * |xi|)^{-1}` applied to raw values.
    pub(crate) fn solve_shifted(&self, values: &[f64], shift: f64, scale: f64) -> Vec<f64> {
        self.apply_symbol(values, |k| 1.0 / (shift + scale * k))
    }

    /// `sum_k |xi_k| |w_hat_k|^2`, normalized so that it equals `h^N <w, Lambda w>`.
    pub(crate) fn seminorm_sq_raw(&self, values: &[f64]) -> f64 {
        let hat = self.transform.forward_real(values);
        let len = self.transform.len() as f64;
        let s: f64 = hat.iter().zip(&self.multiplier).map(|(z, &k)| k * z.norm_sqr()).sum();
        self.grid.cell_volume() * s / len
    }
}

/// `(-Delta)^{1/2} u` via the Fourier multiplier `|xi|`.
pub fn half_laplacian_spectral(u: &Field, plan: &SpectralPlan) -> Result<Field> {
    plan.check(u)?;
    Ok(Field::from_raw(*u.grid(), plan.apply_raw(u.values())))
}

/// Harmonic (Poisson) extension to height `y`: multiplier `exp(-y |xi|)`.
pub fn poisson_extend(u: &Field, y: f64, plan: &SpectralPlan) -> Result<Field> {
    plan.check(u)?;
    if !(y.is_finite() && y > 0.0) {
        return Err(Error::InvalidParameter(format!("extension height y = {y} must be positive")));
    }
    Ok(Field::from_raw(*u.grid(), plan.apply_symbol(u.values(), |k| (-y * k).exp())))
}

/// Discrete `H^{1/2}` seminorm squared, `<w, (-Delta)^{1/2} w>`.
pub fn h_half_seminorm_sq(w: &Field, plan: &SpectralPlan) -> Result<f64> {
    plan.check(w)?;
    Ok(plan.seminorm_sq_raw(w.values()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{sample, Profile};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rel_linf(a: &Field, b: &Field) -> f64 {
        a.sub(b).unwrap().sup_norm() / b.sup_norm()
    }

    fn random_field(grid: GridSpec, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::new(grid, (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn multiplier_invariants() {
        for dim in [1, 2] {
            let g = GridSpec::new(dim, 3.0, 16).unwrap();
            let plan = SpectralPlan::new(&g);
            let m = plan.multiplier();
            assert_eq!(m[0], 0.0);
            assert!(m.iter().all(|&v| v >= 0.0));
            if dim == 1 {
                for k in 1..8 {
                    assert_eq!(m[k], m[16 - k]);
                }
            }
        }
    }

    #[test]
    fn cosine_modes_are_eigenfunctions() {
        let l = 5.0;
        let g = GridSpec::new(1, l, 64).unwrap();
        let plan = SpectralPlan::new(&g);
        for k in 1..=8 {
            let u = sample(&g, &Profile::CosineMode { k, k2: 0 }).unwrap();
            let lu = half_laplacian_spectral(&u, &plan).unwrap();
            let expected = u.scale(k as f64 * PI / l);
            assert!(rel_linf(&lu, &expected) < 1e-12);
        }
    }

    #[test]
    fn constants_are_annihilated_and_preserved() {
        let g = GridSpec::new(2, 2.0, 16).unwrap();
        let plan = SpectralPlan::new(&g);
        let c = Field::constant(g, 3.5);
        assert!(half_laplacian_spectral(&c, &plan).unwrap().sup_norm() < 1e-13);
        let e = poisson_extend(&c, 0.7, &plan).unwrap();
        assert!(e.sub(&c).unwrap().sup_norm() < 1e-13);
        assert!(h_half_seminorm_sq(&c, &plan).unwrap().abs() < 1e-20);
    }

    #[test]
    fn poisson_extension_decays_modes_and_composes() {
        let l = 4.0;
        let g = GridSpec::new(1, l, 32).unwrap();
        let plan = SpectralPlan::new(&g);
        let u = sample(&g, &Profile::CosineMode { k: 3, k2: 0 }).unwrap();
        let e = poisson_extend(&u, 0.2, &plan).unwrap();
        let expected = u.scale((-0.2 * 3.0 * PI / l).exp());
        assert!(rel_linf(&e, &expected) < 1e-12);
        assert!(poisson_extend(&u, 0.0, &plan).is_err());

        let r = random_field(g, 3);
        let once = poisson_extend(&r, 0.5, &plan).unwrap();
        let twice = poisson_extend(&poisson_extend(&r, 0.2, &plan).unwrap(), 0.3, &plan).unwrap();
        assert!(once.sub(&twice).unwrap().sup_norm() < 1e-14);
    }

    #[test]
    fn poisson_kernel_semigroup() {
        let g = GridSpec::new(1, 200.0, 8192).unwrap();
        let plan = SpectralPlan::new(&g);
        let p = sample(&g, &Profile::PoissonKernel { y: 1.0, center: [0.0; 2] }).unwrap();
        let q = sample(&g, &Profile::PoissonKernel { y: 1.5, center: [0.0; 2] }).unwrap();
        let e = poisson_extend(&p, 0.5, &plan).unwrap();
        // Truncation of the |x|^-2 tail shifts the result by O(1/L).
        assert!(rel_linf(&e, &q) < 1e-2);
    }

    #[test]
    fn seminorm_single_mode_and_self_adjointness() {
        let l = 2.5;
        let g = GridSpec::new(1, l, 32).unwrap();
        let plan = SpectralPlan::new(&g);
        let w = sample(&g, &Profile::CosineMode { k: 1, k2: 0 }).unwrap();
        let s = h_half_seminorm_sq(&w, &plan).unwrap();
        assert!((s - PI / l * w.l2_norm().powi(2)).abs() < 1e-12);

        for dim in [1, 2] {
            let g = GridSpec::new(dim, 1.7, 16).unwrap();
            let plan = SpectralPlan::new(&g);
            let w = random_field(g, 11);
            let v = random_field(g, 12);
            let s = h_half_seminorm_sq(&w, &plan).unwrap();
            let direct = w.dot(&half_laplacian_spectral(&w, &plan).unwrap()).unwrap();
            assert!((s - direct).abs() <= 1e-10 * s.abs());
            assert!(s > 0.0);
            // symmetry
            let a = w.dot(&half_laplacian_spectral(&v, &plan).unwrap()).unwrap();
            let b = v.dot(&half_laplacian_spectral(&w, &plan).unwrap()).unwrap();
            assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
            // zero-mode annihilation
            assert!(half_laplacian_spectral(&w, &plan).unwrap().mass().abs() < 1e-12);
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let g = GridSpec::new(1, 1.0, 8).unwrap();
        let plan = SpectralPlan::new(&g.with_points(16).unwrap());
        assert_eq!(half_laplacian_spectral(&Field::zeros(g), &plan), Err(Error::GridMismatch));
    }
}
