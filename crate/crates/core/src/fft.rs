//! Row/column FFTs on square lattices, backed by `rustfft`.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward/inverse DFT on an `n` or `n x n` row-major array.
///
/// The forward transform is unnormalized; the inverse divides by the total length.
#[derive(Clone)]
pub(crate) struct Transform {
    n: usize,
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transform").field("n", &self.n).field("dim", &self.dim).finish()
    }
}

impl Transform {
    pub fn new(n: usize, dim: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, dim, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    fn run(&self, fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        let n = self.n;
        // rows (contiguous)
        fft.process(data);
        if self.dim == 2 {
            let mut column = vec![Complex64::new(0.0, 0.0); n];
            for c in 0..n {
                for r in 0..n {
                    column[r] = data[r * n + c];
                }
                fft.process(&mut column);
                for r in 0..n {
                    data[r * n + c] = column[r];
                }
            }
        }
    }

    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.len());
        self.run(&self.forward, data);
    }

    #[cfg(test)]
    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.len());
        self.run(&self.inverse, data);
        let scale = 1.0 / self.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_in_place(&mut data);
        data
    }

    /// Inverse transform, keeping the real part.
    #[cfg(test)]
    pub fn inverse_real(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.inverse_in_place(&mut data);
        data.into_iter().map(|z| z.re).collect()
    }

    /// Applies a real, even Fourier multiplier to real data.
    ///
    /// In two dimensions the multiplier must be symmetric under exchange of the two
    /// frequency indices (true for radial symbols).
    pub fn apply_multiplier(&self, values: &[f64], multiplier: &[f64]) -> Vec<f64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.convolve_symmetric(&mut data, multiplier, self.n);
        data.into_iter().map(|z| z.re).collect()
    }

    /// `data <- F^{-1}(multiplier * F data)` for a transpose-symmetric multiplier.
    ///
    /// In two dimensions only the first `live_rows` rows of `data` may be nonzero on input,
    /// and only those rows are valid on output. The spectrum is kept in transposed layout,
    /// which saves the two transposes back.
    pub fn convolve_symmetric(&self, data: &mut [Complex64], multiplier: &[f64], live_rows: usize) {
        debug_assert_eq!(data.len(), self.len());
        let n = self.n;
        if self.dim == 1 {
            self.forward.process(data);
            for (z, &s) in data.iter_mut().zip(multiplier) {
                *z *= s;
            }
            self.inverse.process(data);
        } else {
            self.forward.process(&mut data[..live_rows * n]);
            transpose(data, n);
            self.forward.process(data);
            for (z, &s) in data.iter_mut().zip(multiplier) {
                *z *= s;
            }
            self.inverse.process(data);
            transpose(data, n);
            self.inverse.process(&mut data[..live_rows * n]);
        }
        let scale = 1.0 / self.len() as f64;
        let live = if self.dim == 1 { n } else { live_rows * n };
        for z in &mut data[..live] {
            *z *= scale;
        }
    }
}

/// In-place transpose of an `n x n` row-major array, in cache-sized tiles.
fn transpose(data: &mut [Complex64], n: usize) {
    const TILE: usize = 32;
    for rb in (0..n).step_by(TILE) {
        for cb in (rb..n).step_by(TILE) {
            for r in rb..(rb + TILE).min(n) {
                let start = if cb == rb { r + 1 } else { cb };
                for c in start..(cb + TILE).min(n) {
                    data.swap(r * n + c, c * n + r);
                }
            }
        }
    }
}

// rustfft's process() on a row-major buffer of length n*n transforms each row of
// length n in turn, which is what `run` relies on for the first pass.

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_2d() {
        let t = Transform::new(8, 2);
        let v: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
        let back = t.inverse_real(t.forward_real(&v));
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_convolution_matches_full_transforms() {
        let n = 40;
        let t = Transform::new(n, 2);
        let v: Vec<f64> = (0..n * n).map(|i| if i < 17 * n { (i as f64 * 0.11).cos() } else { 0.0 }).collect();
        let mult: Vec<f64> = (0..n * n)
            .map(|i| {
                let (a, b) = (i / n, i % n);
                1.0 + ((a * a + b * b) as f64).sqrt() + (a * b) as f64 * 0.01
            })
            .collect();
        let mut reference = t.forward_real(&v);
        for (z, &s) in reference.iter_mut().zip(&mult) {
            *z *= s;
        }
        let reference = t.inverse_real(reference);
        let mut fast: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        t.convolve_symmetric(&mut fast, &mult, 17);
        for i in 0..17 * n {
            assert!((fast[i].re - reference[i]).abs() < 1e-10);
        }
        let full = t.apply_multiplier(&v, &mult);
        for i in 0..n * n {
            assert!((full[i] - reference[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn tiled_transpose() {
        let n = 70;
        let mut d: Vec<Complex64> = (0..n * n).map(|i| Complex64::new(i as f64, 0.0)).collect();
        transpose(&mut d, n);
        for r in 0..n {
            for c in 0..n {
                assert_eq!(d[r * n + c].re, (c * n + r) as f64);
            }
        }
    }

    #[test]
    fn matches_naive_dft_1d() {
        let n = 6;
        let t = Transform::new(n, 1);
        let v: Vec<f64> = (0..n).map(|i| (i * i) as f64).collect();
        let hat = t.forward_real(&v);
        for (k, z) in hat.iter().enumerate() {
            let mut s = Complex64::new(0.0, 0.0);
            for (j, &x) in v.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                s += Complex64::new(a.cos(), a.sin()) * x;
            }
            assert!((s - z).norm() < 1e-12);
        }
    }
}
