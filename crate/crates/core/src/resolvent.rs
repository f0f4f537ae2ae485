//! One implicit step `u + eps (-Delta)^{1/2}(|u|^{m-1}u) = g`.
//!
//! The unknown is `W = |u|^{m-1}u`. The step is the minimizer of the strictly convex energy
//!
//! ```text
//! J(W) = (eps/2) <W, Lambda W> + m/(m+1) sum |W|^{(m+1)/m} h^N - sum W g h^N
//! ```
//!
//! whose gradient `eps Lambda W + |W|^{1/m - 1} W - g` vanishes exactly at the solution.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fractional::{Backend, HalfLaplacian};
use crate::grid::{dot, odd_pow, Field, OddPowerSpec};

/// Floor of the residual normalization, `max(||g||_2, floor)`.
pub const RESIDUAL_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    /// Inexact Newton directions from preconditioned CG, globalized by Armijo backtracking.
    #[default]
    NewtonCg,
    /// Gradient preconditioned by `(I + eps Lambda)^{-1}`, with Armijo backtracking.
    PreconditionedGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    /// Target for the relative residual.
    pub tol: f64,
    pub max_iter: usize,
    pub armijo_c1: f64,
    pub backtrack: f64,
    #[serde(default)]
    pub method: SolverMethod,
    /// Cap on CG iterations per Newton direction.
    #[serde(default = "default_max_inner")]
    pub max_inner: usize,
}

fn default_max_inner() -> usize {
    400
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 5000,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            method: SolverMethod::NewtonCg,
            max_inner: default_max_inner(),
        }
    }
}

impl SolverSettings {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizeSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub backtracks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub inner_iterations: usize,
    pub final_residual: f64,
    pub final_energy: f64,
    pub step_sizes: StepSizeSummary,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventSolution {
    pub u: Field,
    pub w: Field,
    pub report: SolveReport,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResolventError {
    #[error("invalid resolvent problem: {0}")]
    InvalidProblem(String),
    #[error("grid mismatch between datum and operator")]
    GridMismatch,
    #[error("no convergence after {} iterations (residual {:.3e})", .0.report.iterations, .0.report.final_residual)]
    NonConvergence(Box<ResolventSolution>),
    #[error("non-finite value encountered at iteration {iteration}")]
    NonFiniteEncountered { iteration: usize },
}

/// Data of one implicit step.
#[derive(Debug, Clone, Copy)]
pub struct ResolventProblem<'a> {
    pub epsilon: f64,
    pub m: f64,
    pub g: &'a Field,
    pub op: &'a HalfLaplacian,
    pub settings: SolverSettings,
}

impl<'a> ResolventProblem<'a> {
    pub fn new(epsilon: f64, m: f64, g: &'a Field, op: &'a HalfLaplacian, settings: SolverSettings) -> Self {
        Self { epsilon, m, g, op, settings }
    }

    pub fn backend(&self) -> Backend {
        self.op.backend()
    }

    pub fn validate(&self) -> Result<(), ResolventError> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(ResolventError::InvalidProblem(format!("epsilon = {}", self.epsilon)));
        }
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(ResolventError::InvalidProblem(format!("m = {}", self.m)));
        }
        let s = &self.settings;
        if !(s.tol > 0.0 && s.tol < 1.0) || s.max_iter == 0 {
            return Err(ResolventError::InvalidProblem(format!("tol = {}, max_iter = {}", s.tol, s.max_iter)));
        }
        if !(s.armijo_c1 > 0.0 && s.armijo_c1 < 0.5 && s.backtrack > 0.0 && s.backtrack < 1.0) {
            return Err(ResolventError::InvalidProblem("armijo parameters out of range".into()));
        }
        if self.g.grid() != self.op.grid() {
            return Err(ResolventError::GridMismatch);
        }
        if self.g.values().iter().any(|v| !v.is_finite()) {
            return Err(ResolventError::NonFiniteEncountered { iteration: 0 });
        }
        Ok(())
    }

    fn weight(&self) -> f64 {
        self.g.grid().cell_volume()
    }

    /// `||g||_2` with the floor applied.
    pub fn residual_scale(&self) -> f64 {
        self.g.l2_norm().max(RESIDUAL_FLOOR)
    }

    /// Conversion factor from relative residual to L^1 perturbation: the box measure.
    pub fn kappa(&self) -> f64 {
        self.g.grid().box_measure()
    }
}

fn check_grid(w: &Field, prob: &ResolventProblem) -> Result<(), ResolventError> {
    if w.grid() != prob.g.grid() || w.grid() != prob.op.grid() {
        Err(ResolventError::GridMismatch)
    } else {
        Ok(())
    }
}

fn power_term(w: f64, p: f64) -> f64 {
    w.abs().powf(p) / p
}

/// `J(W)`.
pub fn energy(w: &Field, prob: &ResolventProblem) -> Result<f64, ResolventError> {
    check_grid(w, prob)?;
    let q = prob.op.quadratic_form(w).map_err(|_| ResolventError::GridMismatch)?;
    Ok(energy_with_form(w.values(), q, prob))
}

fn energy_with_form(w: &[f64], quadratic: f64, prob: &ResolventProblem) -> f64 {
    let p = (prob.m + 1.0) / prob.m;
    let local: f64 = w.iter().zip(prob.g.values()).map(|(&wi, &gi)| power_term(wi, p) - wi * gi).sum();
    0.5 * prob.epsilon * quadratic + prob.weight() * local
}

/// `eps Lambda W + |W|^{1/m-1} W - g`.
pub fn energy_gradient(w: &Field, prob: &ResolventProblem) -> Result<Field, ResolventError> {
    check_grid(w, prob)?;
    let lw = prob.op.apply_raw(w.values());
    Ok(Field::from_raw(*w.grid(), gradient_raw(w.values(), &lw, prob)))
}

fn gradient_raw(w: &[f64], lw: &[f64], prob: &ResolventProblem) -> Vec<f64> {
    let inv = 1.0 / prob.m;
    w.iter()
        .zip(lw)
        .zip(prob.g.values())
        .map(|((&wi, &li), &gi)| prob.epsilon * li + odd_pow(wi, inv) - gi)
        .collect()
}

/// `Phi(a + delta) - Phi(a) - delta Phi'(a)` for `Phi(s) = |s|^p / p`, without cancellation.
fn bregman(a: f64, delta: f64, p: f64) -> f64 {
    if delta == 0.0 {
        return 0.0;
    }
    if a == 0.0 {
        return delta.abs().powf(p) / p;
    }
    let x = delta / a;
    let scale = a.abs().powf(p);
    if x.abs() < 1e-3 {
        let (c2, c3, c4, c5) = (p - 1.0, (p - 1.0) * (p - 2.0), (p - 1.0) * (p - 2.0) * (p - 3.0), (p - 1.0) * (p - 2.0) * (p - 3.0) * (p - 4.0));
        let x2 = x * x;
        scale * x2 * (c2 / 2.0 + x * (c3 / 6.0 + x * (c4 / 24.0 + x * c5 / 120.0)))
    } else if x > -1.0 && x < 1e3 {
        scale * ((p * x.ln_1p()).exp_m1() / p - x)
    } else {
        (a + delta).abs().powf(p) / p - scale / p - delta * odd_pow(a, p - 1.0)
    }
}

struct Workspace<'p, 'a> {
    prob: &'p ResolventProblem<'a>,
    p: f64,
    inv_m: f64,
    weight: f64,
}

impl Workspace<'_, '_> {
    /// Exact energy change along `t d`, given `Lambda d` and the gradient `r` at `w`.
    fn energy_change(&self, w: &[f64], d: &[f64], ld: &[f64], r: &[f64], t: f64) -> f64 {
        let linear = t * dot(d, r);
        let quad = 0.5 * self.prob.epsilon * t * t * dot(d, ld);
        let breg: f64 = w.iter().zip(d).map(|(&wi, &di)| bregman(wi, t * di, self.p)).sum();
        self.weight * (linear + quad + breg)
    }

    /// Diagonal of the Hessian of the local term, `(1/m)|W|^{1/m - 1}`, floored at zero crossings.
    fn local_curvature(&self, w: &[f64], floor: f64) -> Vec<f64> {
        let e = self.inv_m - 1.0;
        w.iter()
            .map(|&wi| {
                let a = if e < 0.0 { wi.abs().max(floor) } else { wi.abs() };
                self.inv_m * a.powf(e)
            })
            .collect()
    }

    /// Preconditioned CG on `(eps Lambda + diag(curv)) d = -r`.
    fn newton_direction(&self, r: &[f64], curv: &[f64], jacobi: &[f64], rtol: f64, max_inner: usize) -> (Vec<f64>, usize) {
        let eps = self.prob.epsilon;
        let op = self.prob.op;
        let n = r.len();
        let precond: Vec<f64> = curv.iter().zip(jacobi).map(|(c, j)| 1.0 / (c + eps * j)).collect();
        let mut x = vec![0.0; n];
        let mut res: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut z: Vec<f64> = res.iter().zip(&precond).map(|(a, b)| a * b).collect();
        let mut dir = z.clone();
        let mut rz = dot(&res, &z);
        let target = rtol * dot(r, r).sqrt();
        let mut iters = 0;
        while iters < max_inner {
            if dot(&res, &res).sqrt() <= target {
                break;
            }
            let ld = op.apply_raw(&dir);
            let hd: Vec<f64> = ld.iter().zip(curv).zip(&dir).map(|((l, c), d)| eps * l + c * d).collect();
            let dhd = dot(&dir, &hd);
            iters += 1;
            if !(dhd > 0.0) {
                break;
            }
            let alpha = rz / dhd;
            for i in 0..n {
                x[i] += alpha * dir[i];
                res[i] -= alpha * hd[i];
            }
            z = res.iter().zip(&precond).map(|(a, b)| a * b).collect();
            let rz_new = dot(&res, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                dir[i] = z[i] + beta * dir[i];
            }
        }
        if iters == 0 || x.iter().all(|&v| v == 0.0) {
            // fall back to the Jacobi-scaled steepest descent direction
            x = r.iter().zip(&precond).map(|(a, b)| -a * b).collect();
        }
        (x, iters)
    }
}

/// Solves the implicit step from the warm start `W0 = |g|^{m-1} g`.
pub fn solve_resolvent(prob: &ResolventProblem) -> Result<ResolventSolution, ResolventError> {
    prob.validate()?;
    let w0 = prob.g.odd_power(OddPowerSpec::new(prob.m).expect("m validated"));
    solve_resolvent_from(prob, w0)
}

/// Solves the implicit step from an arbitrary initial iterate.
pub fn solve_resolvent_from(prob: &ResolventProblem, w0: Field) -> Result<ResolventSolution, ResolventError> {
    prob.validate()?;
    check_grid(&w0, prob)?;
    let grid = *prob.g.grid();
    let settings = prob.settings;
    let to_u = OddPowerSpec::new(1.0 / prob.m).expect("m validated");

    if prob.g.values().iter().all(|&v| v == 0.0) {
        let report = SolveReport {
            iterations: 0,
            inner_iterations: 0,
            final_residual: 0.0,
            final_energy: 0.0,
            step_sizes: StepSizeSummary { min: 0.0, max: 0.0, mean: 0.0, backtracks: 0 },
            converged: true,
        };
        return Ok(ResolventSolution { u: Field::zeros(grid), w: Field::zeros(grid), report });
    }

    let ws = Workspace { prob, p: (prob.m + 1.0) / prob.m, inv_m: 1.0 / prob.m, weight: grid.cell_volume() };
    let scale = prob.residual_scale() / grid.cell_volume().sqrt();
    let jacobi = prob.op.diagonal();
    let spectral = prob.op.spectral();
    let gmax = prob.g.sup_norm();
    let floor = (1e-14 * gmax).powf(prob.m).max(1e-300);

    let mut w = w0.into_values();
    let mut lw = prob.op.apply_raw(&w);
    let mut r = gradient_raw(&w, &lw, prob);
    let mut residual = dot(&r, &r).sqrt() / scale;

    let mut iterations = 0;
    let mut inner_total = 0;
    let (mut tmin, mut tmax, mut tsum, mut backtracks) = (f64::INFINITY, 0.0f64, 0.0, 0usize);
    let mut accepted = 0usize;
    let mut last_t = 1.0f64;
    // Relative lift of the curvature floor. The exact curvature is unbounded at sign changes
    // when m > 1 and pins those nodes near zero; lifting the floor lets them cross.
    let mut lift = 0.0f64;

    while residual > settings.tol && iterations < settings.max_iter {
        iterations += 1;
        let (mut d, inner) = match settings.method {
            SolverMethod::NewtonCg => {
                let wmax = w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let curv = ws.local_curvature(&w, floor.max(lift * wmax));
                let rtol = (residual.sqrt()).min(0.1);
                ws.newton_direction(&r, &curv, &jacobi, rtol, settings.max_inner)
            }
            SolverMethod::PreconditionedGradient => {
                (spectral.solve_shifted(&r, 1.0, prob.epsilon).into_iter().map(|v| -v).collect(), 0)
            }
        };
        inner_total += inner;
        if dot(&d, &r) >= 0.0 {
            d = spectral.solve_shifted(&r, 1.0, prob.epsilon).into_iter().map(|v| -v).collect();
        }
        let ld = prob.op.apply_raw(&d);
        let slope = ws.weight * dot(&d, &r);
        let mut t = match settings.method {
            SolverMethod::NewtonCg => 1.0,
            SolverMethod::PreconditionedGradient => (2.0 * last_t).min(1e6),
        };
        let mut accepted_step = false;
        for _ in 0..200 {
            let de = ws.energy_change(&w, &d, &ld, &r, t);
            if !de.is_finite() {
                return Err(ResolventError::NonFiniteEncountered { iteration: iterations });
            }
            if de < 0.0 && de <= settings.armijo_c1 * t * slope {
                accepted_step = true;
                break;
            }
            t *= settings.backtrack;
            backtracks += 1;
        }
        if !accepted_step {
            // no representable decrease left
            break;
        }
        accepted += 1;
        last_t = t;
        tmin = tmin.min(t);
        tmax = tmax.max(t);
        tsum += t;
        for i in 0..w.len() {
            w[i] += t * d[i];
            lw[i] += t * ld[i];
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(ResolventError::NonFiniteEncountered { iteration: iterations });
        }
        // refresh Lambda W periodically to avoid drift from the incremental update
        if iterations % 20 == 0 {
            lw = prob.op.apply_raw(&w);
        }
        r = gradient_raw(&w, &lw, prob);
        let previous = residual;
        residual = dot(&r, &r).sqrt() / scale;
        // Newton on sign(W)|W|^{1/m} cycles W -> -W near a sign change: full steps, flat residual
        if t == 1.0 && residual > 0.9 * previous {
            lift = (lift * 10.0).clamp(1e-8, 1e-1);
        } else if t < 0.5 {
            // overshoot: the lifted curvature is too small
            lift = if lift > 1e-8 { lift / 10.0 } else { 0.0 };
        }
    }

    // final residual from a fresh operator application
    lw = prob.op.apply_raw(&w);
    r = gradient_raw(&w, &lw, prob);
    residual = dot(&r, &r).sqrt() / scale;
    let final_energy = energy_with_form(&w, ws.weight * dot(&w, &lw), prob);
    let converged = residual <= settings.tol;
    let step_sizes = if accepted == 0 {
        StepSizeSummary { min: 0.0, max: 0.0, mean: 0.0, backtracks }
    } else {
        StepSizeSummary { min: tmin, max: tmax, mean: tsum / accepted as f64, backtracks }
    };
    let report = SolveReport {
        iterations,
        inner_iterations: inner_total,
        final_residual: residual,
        final_energy,
        step_sizes,
        converged,
    };
    let w = Field::from_raw(grid, w);
    let u = w.odd_power(to_u);
    let solution = ResolventSolution { u, w, report };
    if converged {
        Ok(solution)
    } else {
        Err(ResolventError::NonConvergence(Box::new(solution)))
    }
}

/// Outcome of solving two resolvent problems that share `eps`, `m` and the operator.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionCheck {
    /// `||(g1 - g2)_+||_1 - ||(u1 - u2)_+||_1`.
    pub margin: f64,
    pub kappa: f64,
    /// `kappa * (tol1 + tol2)`.
    pub slack: f64,
    pub pass: bool,
    pub first: ResolventSolution,
    pub second: ResolventSolution,
}

pub fn resolvent_contraction_check(
    first: &ResolventProblem,
    second: &ResolventProblem,
) -> Result<ContractionCheck, ResolventError> {
    if first.g.grid() != second.g.grid() {
        return Err(ResolventError::GridMismatch);
    }
    if first.epsilon != second.epsilon || first.m != second.m || first.backend() != second.backend() {
        return Err(ResolventError::InvalidProblem("contraction check needs shared eps, m and backend".into()));
    }
    let s1 = solve_resolvent(first)?;
    let s2 = solve_resolvent(second)?;
    let dg = first.g.sub(second.g).expect("grids checked").positive_part_l1();
    let du = s1.u.sub(&s2.u).expect("grids checked").positive_part_l1();
    let kappa = first.kappa();
    let slack = kappa * (first.settings.tol + second.settings.tol);
    let margin = dg - du;
    Ok(ContractionCheck { margin, kappa, slack, pass: margin >= -slack, first: s1, second: s2 })
}
