//! Realizations of the half-Laplacian `(-Delta)^{1/2}`.
//!
//! * [`spectral`]: Fourier multiplier `|xi|` on the periodic box.
//! * [`riesz`]: singular integral with kernel `C_N |x - y|^{-(N+1)}`, zero outside the box.
//! * [`dtn`]: normal derivative of the harmonic extension (Dirichlet-to-Neumann map).

pub mod dtn;
mod operator;
pub mod riesz;
pub mod selftest;
pub mod spectral;

pub use dtn::dtn_finite_difference;
pub use operator::{Backend, HalfLaplacian, OperatorOptions};
pub use riesz::{half_laplacian_riesz, RieszPlan, SingularCorrection};
pub use selftest::{operator_selftest, SelfTestReport};
pub use spectral::{h_half_seminorm_sq, half_laplacian_spectral, poisson_extend, SpectralPlan};
