//! Singular-integral realization of `(-Delta)^{1/2}` with the zero-exterior convention.
//!
//! At each lattice point
//!
//! ```text
//! (Lambda u)_i = C_N [ sum_{j != i} (u_i - u_j) h^N / |x_i - x_j|^{N+1} + S_i + T_i ]
//! ```
//!
//! where `S_i` approximates the principal value over the cell of `x_i` and
//! `T_i = u_i * int_{exterior} |x_i - y|^{-(N+1)} dy` accounts for `u = 0` outside the box.
//! The lattice sum is a discrete convolution and is evaluated with a zero-padded FFT.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Transform;
use crate::grid::{Field, GridSpec};
use crate::profile::riesz_constant;

/// Treatment of the cell containing the singularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SingularCorrection {
    /// Local quadratic fit: `S_i = -(gamma_N h / 2) (Delta_h u)_i`.
    #[default]
    Quadratic,
    /// `S_i = 0`.
    None,
}

/// Weight `gamma_N` of the singular-cell correction: minus the zeta-regularized lattice sum
/// `sum_{j != 0} j_1^2 / |j|^{N+1}`, which makes the punctured lattice sum exact on quadratics.
fn cell_moment(dim: usize) -> f64 {
    match dim {
        1 => 1.0,
        // -(1/2) Z(1/2) = -2 zeta(1/2) beta(1/2) for the square lattice
        _ => 1.950_132_460_000_98,
    }
}

#[derive(Debug, Clone)]
pub struct RieszPlan {
    grid: GridSpec,
    normalization: f64,
    correction: SingularCorrection,
    padded: Transform,
    kernel_hat: Vec<f64>,
    /// `sum_{j != i} h^N |x_i - x_j|^{-(N+1)}` over lattice points inside the box.
    row_sum: Vec<f64>,
    /// Closed-form exterior integral at each point.
    exterior: Vec<f64>,
}

/// `int_{y_1 > p, y_2 > q} |y|^{-3} dy` for `p, q > 0`.
fn quadrant(p: f64, q: f64) -> f64 {
    1.0 / p + 1.0 / q - (p * p + q * q).sqrt() / (p * q)
}

impl RieszPlan {
    pub fn new(grid: &GridSpec, correction: SingularCorrection) -> Self {
        let n = grid.points_per_dim();
        let dim = grid.dim();
        let h = grid.spacing();
        let big = 2 * n;
        let padded = Transform::new(big, dim);
        let power = dim as i32 + 1;
        let weight = grid.cell_volume();
        let signed = |i: usize| -> f64 {
            if i < n {
                i as f64
            } else {
                i as f64 - big as f64
            }
        };
        let mut kernel = vec![Complex64::new(0.0, 0.0); padded.len()];
        for (slot, k) in kernel.iter_mut().enumerate() {
            let (a, b) = match dim {
                1 => (signed(slot), 0.0),
                _ => (signed(slot / big), signed(slot % big)),
            };
            // offset n never occurs between points of the box
            if (a == 0.0 && b == 0.0) || a.abs() >= n as f64 || b.abs() >= n as f64 {
                continue;
            }
            let r = h * (a * a + b * b).sqrt();
            k.re = weight / r.powi(power);
        }
        padded.forward_in_place(&mut kernel);
        let kernel_hat: Vec<f64> = kernel.iter().map(|z| z.re).collect();

        // cell edges: lattice points cover [-L - h/2, L - h/2)
        let lo = -grid.half_width() - h / 2.0;
        let hi = grid.half_width() - h / 2.0;
        let exterior = (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                let (d1, d2) = (x[0] - lo, hi - x[0]);
                if dim == 1 {
                    1.0 / d1 + 1.0 / d2
                } else {
                    let (e1, e2) = (x[1] - lo, hi - x[1]);
                    2.0 * (1.0 / d1 + 1.0 / d2 + 1.0 / e1 + 1.0 / e2)
                        - (quadrant(d1, e1) + quadrant(d1, e2) + quadrant(d2, e1) + quadrant(d2, e2))
                }
            })
            .collect();

        let mut plan = Self {
            grid: *grid,
            normalization: riesz_constant(dim),
            correction,
            padded,
            kernel_hat,
            row_sum: Vec::new(),
            exterior,
        };
        plan.row_sum = plan.convolve(&vec![1.0; grid.len()]);
        plan
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `C_N`.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn correction(&self) -> SingularCorrection {
        self.correction
    }

    /// Exterior integral `int_{outside} |x_i - y|^{-(N+1)} dy` (without `C_N`).
    pub fn exterior_factor(&self) -> &[f64] {
        &self.exterior
    }

    /// Lattice convolution `sum_{j != i} h^N K(x_i - x_j) v_j` with zero padding.
    fn convolve(&self, values: &[f64]) -> Vec<f64> {
        let n = self.grid.points_per_dim();
        let big = 2 * n;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.padded.len()];
        match self.grid.dim() {
            1 => {
                for (b, &v) in buf.iter_mut().zip(values) {
                    b.re = v;
                }
            }
            _ => {
                for r in 0..n {
                    for c in 0..n {
                        buf[r * big + c].re = values[r * n + c];
                    }
                }
            }
        }
        self.padded.convolve_symmetric(&mut buf, &self.kernel_hat, n);
        match self.grid.dim() {
            1 => buf[..n].iter().map(|z| z.re).collect(),
            _ => {
                let mut out = Vec::with_capacity(n * n);
                for r in 0..n {
                    out.extend(buf[r * big..r * big + n].iter().map(|z| z.re));
                }
                out
            }
        }
    }

    /// Zero-exterior five-point (three-point in 1D) Laplacian.
    fn discrete_laplacian(&self, u: &[f64]) -> Vec<f64> {
        let n = self.grid.points_per_dim() as isize;
        let h2 = self.grid.spacing().powi(2);
        let inside = |i: isize| (0..n).contains(&i);
        match self.grid.dim() {
            1 => (0..n)
                .map(|i| {
                    let get = |j: isize| if inside(j) { u[j as usize] } else { 0.0 };
                    (get(i - 1) - 2.0 * get(i) + get(i + 1)) / h2
                })
                .collect(),
            _ => (0..n * n)
                .map(|idx| {
                    let (r, c) = (idx / n, idx % n);
                    let get = |rr: isize, cc: isize| {
                        if inside(rr) && inside(cc) {
                            u[(rr * n + cc) as usize]
                        } else {
                            0.0
                        }
                    };
                    (get(r - 1, c) + get(r + 1, c) + get(r, c - 1) + get(r, c + 1) - 4.0 * get(r, c)) / h2
                })
                .collect(),
        }
    }

    pub(crate) fn apply_raw(&self, u: &[f64]) -> Vec<f64> {
        let conv = self.convolve(u);
        let c = self.normalization;
        let mut out: Vec<f64> = u
            .iter()
            .zip(&conv)
            .zip(self.row_sum.iter().zip(&self.exterior))
            .map(|((&ui, &ki), (&rs, &ext))| c * (ui * (rs + ext) - ki))
            .collect();
        if self.correction == SingularCorrection::Quadratic {
            let s = -0.5 * cell_moment(self.grid.dim()) * self.grid.spacing() * c;
            for (o, l) in out.iter_mut().zip(self.discrete_laplacian(u)) {
                *o += s * l;
            }
        }
        out
    }

    /// Contribution of prescribed exterior values `psi` (at the `W` level):
    /// `(Lambda v)_i = (Lambda_box v)_i - s_i` where `v` equals the grid values inside
    /// and `psi` outside.
    ///
    /// The exterior integral is evaluated on the lattice of a box `factor` times larger
    /// (odd `factor`), with `psi(x_i)` subtracted to tame the near-singular kernel; `tail(x)`
    /// must return `int psi(y) |x - y|^{-(N+1)} dy` over the region beyond the larger box.
    /// With the quadratic correction, the out-of-box stencil neighbours read `psi` as well.
    pub fn exterior_source(
        &self,
        psi: impl Fn([f64; 2]) -> f64,
        factor: usize,
        tail: impl Fn([f64; 2]) -> f64,
    ) -> Result<Field> {
        if factor < 3 || factor % 2 == 0 {
            return Err(Error::InvalidParameter(format!("enlargement factor {factor} must be odd and >= 3")));
        }
        let n = self.grid.points_per_dim();
        let dim = self.grid.dim();
        let big_grid = GridSpec::new(dim, self.grid.half_width() * factor as f64, n * factor)?;
        let big = RieszPlan::new(&big_grid, SingularCorrection::None);
        let nb = n * factor;
        let shift = (factor - 1) * n / 2;
        let inside = |k: usize| (shift..shift + n).contains(&k);
        let to_big = |i: usize| match dim {
            1 => i + shift,
            _ => (i / n + shift) * nb + i % n + shift,
        };
        let outer: Vec<f64> = (0..big_grid.len())
            .map(|k| {
                let interior = match dim {
                    1 => inside(k),
                    _ => inside(k / nb) && inside(k % nb),
                };
                if interior {
                    0.0
                } else {
                    psi(big_grid.point(k))
                }
            })
            .collect();
        let conv = big.convolve(&outer);
        let c = self.normalization;
        let h2 = self.grid.spacing().powi(2);
        let ghost = -0.5 * cell_moment(dim) * self.grid.spacing() * c / h2;
        let values = (0..self.grid.len())
            .map(|i| {
                let x = self.grid.point(i);
                let k = to_big(i);
                let exact_shell = self.exterior[i] - big.exterior[k];
                let lattice_shell = big.row_sum[k] - self.row_sum[i];
                let mut s = c * (conv[k] + psi(x) * (exact_shell - lattice_shell) + tail(x));
                if self.correction == SingularCorrection::Quadratic {
                    let neighbours: Vec<usize> = match dim {
                        1 => vec![k - 1, k + 1],
                        _ => vec![k - nb, k + nb, k - 1, k + 1],
                    };
                    let outside: f64 = neighbours.iter().map(|&j| outer[j]).sum();
                    s -= ghost * outside;
                }
                s
            })
            .collect();
        Field::new(self.grid, values)
    }

    /// Diagonal entries of the discrete operator.
    pub(crate) fn diagonal(&self) -> Vec<f64> {
        let c = self.normalization;
        let extra = match self.correction {
            SingularCorrection::Quadratic => {
                0.5 * cell_moment(self.grid.dim()) * self.grid.spacing() * 2.0 * self.grid.dim() as f64
                    / self.grid.spacing().powi(2)
            }
            SingularCorrection::None => 0.0,
        };
        self.row_sum.iter().zip(&self.exterior).map(|(rs, ext)| c * (rs + ext + extra)).collect()
    }
}

/// `(-Delta)^{1/2} u` via the singular integral, zero outside the box.
pub fn half_laplacian_riesz(u: &Field, plan: &RieszPlan) -> Result<Field> {
    if *u.grid() != plan.grid {
        return Err(Error::GridMismatch);
    }
    Ok(Field::from_raw(*u.grid(), plan.apply_raw(u.values())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Direct O(n^2) evaluation of the lattice sum.
    fn brute_force(u: &[f64], grid: &GridSpec) -> Vec<f64> {
        let p = grid.dim() as i32 + 1;
        (0..grid.len())
            .map(|i| {
                let xi = grid.point(i);
                (0..grid.len())
                    .filter(|&j| j != i)
                    .map(|j| {
                        let xj = grid.point(j);
                        let r = ((xi[0] - xj[0]).powi(2) + (xi[1] - xj[1]).powi(2)).sqrt();
                        (u[i] - u[j]) * grid.cell_volume() / r.powi(p)
                    })
                    .sum::<f64>()
            })
            .collect()
    }

    #[test]
    fn fft_convolution_matches_direct_sum() {
        for dim in [1, 2] {
            let g = GridSpec::new(dim, 2.0, 12).unwrap();
            let plan = RieszPlan::new(&g, SingularCorrection::None);
            let u: Vec<f64> = (0..g.len()).map(|i| ((i * 7 % 13) as f64 * 0.3).sin()).collect();
            let fast = plan.apply_raw(&u);
            let slow = brute_force(&u, &g);
            for i in 0..g.len() {
                let expect = plan.normalization() * (slow[i] + u[i] * plan.exterior_factor()[i]);
                assert!((fast[i] - expect).abs() < 1e-10 * (1.0 + expect.abs()), "dim {dim} i {i}");
            }
        }
    }

    #[test]
    fn exterior_integral_against_quadrature() {
        // 2D: integrate |x - y|^{-3} over the complement in polar coordinates around x.
        let g = GridSpec::new(2, 1.0, 8).unwrap();
        let plan = RieszPlan::new(&g, SingularCorrection::None);
        let h = g.spacing();
        let (lo, hi) = (-1.0 - h / 2.0, 1.0 - h / 2.0);
        for &i in &[0usize, 9, 27, 63] {
            let x = g.point(i);
            // distance to the rectangle boundary along direction theta
            let steps = 20000;
            let mut total = 0.0;
            for s in 0..steps {
                let th = (s as f64 + 0.5) * 2.0 * PI / steps as f64;
                let (c, sn) = (th.cos(), th.sin());
                let tx = if c > 0.0 { (hi - x[0]) / c } else { (lo - x[0]) / c };
                let ty = if sn > 0.0 { (hi - x[1]) / sn } else { (lo - x[1]) / sn };
                let rho = tx.min(ty);
                // int_rho^inf r^{-3} r dr = 1/rho
                total += 1.0 / rho;
            }
            total *= 2.0 * PI / steps as f64;
            assert!((total - plan.exterior_factor()[i]).abs() < 1e-5 * total, "{total} vs {}", plan.exterior_factor()[i]);
        }
    }

    #[test]
    fn exterior_source_restores_whole_line_image() {
        let g = GridSpec::new(1, 20.0, 512).unwrap();
        let plan = RieszPlan::new(&g, SingularCorrection::Quadratic);
        let p = |x: [f64; 2]| 1.0 / PI / (1.0 + x[0] * x[0]);
        let big_l: f64 = 60.0;
        let src = plan.exterior_source(p, 3, |_| 2.0 / (3.0 * PI * big_l.powi(3))).unwrap();
        let u = Field::from_fn(g, p).unwrap();
        let full = half_laplacian_riesz(&u, &plan).unwrap().sub(&src).unwrap();
        let exact = Field::from_fn(g, |x| {
            let s = x[0] * x[0];
            (1.0 - s) / (1.0 + s).powi(2) / PI
        })
        .unwrap();
        let err = full.sub(&exact).unwrap().sup_norm() / exact.sup_norm();
        assert!(err < 5e-3, "{err}");
    }

    #[test]
    fn exterior_source_of_constant_is_exact() {
        let g = GridSpec::new(1, 5.0, 64).unwrap();
        let plan = RieszPlan::new(&g, SingularCorrection::None);
        let h = g.spacing();
        let (lo, hi) = (-15.0 - h / 2.0, 15.0 - h / 2.0);
        let src = plan.exterior_source(|_| 2.0, 3, |x| 2.0 * (1.0 / (x[0] - lo) + 1.0 / (hi - x[0]))).unwrap();
        for i in 0..64 {
            let expect = 2.0 / PI * plan.exterior_factor()[i];
            assert!((src.values()[i] - expect).abs() < 1e-10 * expect);
        }
        assert!(plan.exterior_source(|_| 1.0, 2, |_| 0.0).is_err());
    }

    #[test]
    fn exterior_source_restores_whole_plane_image() {
        // (1 + |x|^2)^{-1/2} has image (1 + |x|^2)^{-3/2} in two dimensions
        let g = GridSpec::new(2, 10.0, 64).unwrap();
        let plan = RieszPlan::new(&g, SingularCorrection::Quadratic);
        let psi = |x: [f64; 2]| (1.0 + x[0] * x[0] + x[1] * x[1]).powf(-0.5);
        let big_l = 30.0;
        let src = plan.exterior_source(psi, 3, |_| (PI + 2.0) / (2.0 * big_l * big_l)).unwrap();
        let u = Field::from_fn(g, psi).unwrap();
        let full = half_laplacian_riesz(&u, &plan).unwrap().sub(&src).unwrap();
        let exact = Field::from_fn(g, |x| psi(x).powi(3)).unwrap();
        let err = full.sub(&exact).unwrap().sup_norm() / exact.sup_norm();
        assert!(err < 0.02, "{err}");
        let zero_exterior = half_laplacian_riesz(&u, &plan).unwrap().sub(&exact).unwrap().sup_norm();
        assert!(zero_exterior > 10.0 * err * exact.sup_norm());
    }

    #[test]
    fn constants_only_see_the_exterior() {
        let g = GridSpec::new(1, 5.0, 64).unwrap();
        let plan = RieszPlan::new(&g, SingularCorrection::Quadratic);
        let c = Field::constant(g, 2.0);
        let out = half_laplacian_riesz(&c, &plan).unwrap();
        assert!(out.values().iter().all(|&v| v > 0.0));
        let mid = out.values()[32];
        let edge = out.values()[1];
        assert!(mid < edge);
        let expect = 2.0 / PI * plan.exterior_factor()[32];
        assert!((mid - expect).abs() < 1e-12);
    }

    #[test]
    fn poisson_kernel_image() {
        // For p = (1/pi)/(1+x^2) the harmonic extension is (1/pi)(1+y)/(x^2+(1+y)^2);
        // -d/dy at y=0 gives (1/pi)(1-x^2)/(1+x^2)^2.
        let g = GridSpec::new(1, 40.0, 2048).unwrap();
        let plan = RieszPlan::new(&g, SingularCorrection::Quadratic);
        let u = Field::from_fn(g, |x| 1.0 / PI / (1.0 + x[0] * x[0])).unwrap();
        let lu = half_laplacian_riesz(&u, &plan).unwrap();
        let mut err: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..g.len() {
            let x = g.coordinate(i);
            if x.abs() <= 10.0 {
                let exact = (1.0 - x * x) / (1.0 + x * x).powi(2) / PI;
                err = err.max((lu.values()[i] - exact).abs());
                scale = scale.max(exact.abs());
            }
        }
        assert!(err / scale < 0.02, "relative error {}", err / scale);
    }

    #[test]
    fn operator_is_symmetric() {
        let g = GridSpec::new(2, 1.5, 10).unwrap();
        let plan = RieszPlan::new(&g, SingularCorrection::Quadratic);
        let u: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.91).cos()).collect();
        let v: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = crate::grid::dot(&u, &plan.apply_raw(&v));
        let b = crate::grid::dot(&v, &plan.apply_raw(&u));
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
        // diagonal agrees with unit-vector probes
        let diag = plan.diagonal();
        for i in [0, 17, 55] {
            let mut e = vec![0.0; g.len()];
            e[i] = 1.0;
            assert!((plan.apply_raw(&e)[i] - diag[i]).abs() < 1e-9 * diag[i]);
        }
    }
}
