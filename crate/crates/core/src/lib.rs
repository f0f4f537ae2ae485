//! Solver and verification toolkit for the fractional porous medium equation
//!
//! ```text
//! u_t + (-Delta)^{1/2} (|u|^{m-1} u) = 0
//! ```
//!
//! on a truncated box in one or two dimensions. Time stepping is implicit Euler; each
//! step is a strictly convex minimization in `W = |u|^{m-1} u`. The [`diagnostics`]
//! module turns the qualitative and quantitative properties of the equation (mass
//! conservation, L^1 contraction, smoothing, extinction, positivity, ...) into checks
//! with explicit slacks.

pub mod analytic;
pub mod diagnostics;
pub mod error;
pub mod evolution;
mod fft;
pub mod fractional;
pub mod grid;
pub mod io;
pub mod profile;
pub mod resolvent;

pub use error::{Error, Result};
pub use grid::{Field, GridSpec, LpExponent, OddPowerSpec};
pub use profile::{sample, Profile};
