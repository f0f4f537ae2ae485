//! Implicit time discretization: `u_k = (I + eps A)^{-1} u_{k-1}` with `eps = T / n`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::fractional::{poisson_extend, HalfLaplacian, SpectralPlan};
use crate::grid::Field;
use crate::resolvent::{solve_resolvent, ResolventError, ResolventProblem, SolveReport, SolverSettings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub m: f64,
    pub horizon: f64,
    pub n_steps: usize,
    #[serde(default = "one")]
    pub snapshot_stride: usize,
    #[serde(default)]
    pub solver: SolverSettings,
}

fn one() -> usize {
    1
}

impl EvolutionConfig {
    pub fn new(m: f64, horizon: f64, n_steps: usize) -> Self {
        Self { m, horizon, n_steps, snapshot_stride: 1, solver: SolverSettings::default() }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn with_solver(mut self, solver: SolverSettings) -> Self {
        self.solver = solver;
        self
    }

    pub fn epsilon(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(Error::InvalidParameter(format!("m = {} must be positive", self.m)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon = {}", self.horizon)));
        }
        if self.n_steps == 0 || self.snapshot_stride == 0 {
            return Err(Error::InvalidParameter("n_steps and snapshot_stride must be positive".into()));
        }
        Ok(())
    }
}

/// Per-step scalar series (index 0 is the initial datum).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub mass: f64,
    pub l1: f64,
    pub l2: f64,
    /// `||u||_{m+1}`.
    pub lm1: f64,
    pub linf: f64,
    pub min: f64,
    /// `eps <W_k, Lambda W_k>`; zero for the datum.
    pub dissipation: f64,
    /// `||u_k - u_{k-1}||_1`; zero for the datum.
    pub step_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub config: EvolutionConfig,
    pub backend: crate::fractional::Backend,
    /// Times of the recorded snapshots.
    pub times: Vec<f64>,
    pub snapshots: Vec<Field>,
    /// One report per completed step.
    pub reports: Vec<SolveReport>,
    pub series: Vec<SeriesRow>,
    /// Step index at which the run failed, if any.
    pub failed_at: Option<usize>,
}

impl Trajectory {
    pub fn initial(&self) -> &Field {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Field {
        self.snapshots.last().expect("trajectory holds the datum")
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon()
    }

    pub fn m(&self) -> f64 {
        self.config.m
    }

    pub fn completed_steps(&self) -> usize {
        self.reports.len()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolutionError {
    #[error("invalid evolution setup: {0}")]
    Invalid(#[from] Error),
    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        source: ResolventError,
        partial: Box<Trajectory>,
    },
}

fn row(u: &Field, m: f64, t: f64, dissipation: f64, step_change: f64) -> SeriesRow {
    SeriesRow {
        t,
        mass: u.mass(),
        l1: u.l1_norm(),
        l2: u.l2_norm(),
        lm1: u.lp_norm_unchecked(m + 1.0),
        linf: u.sup_norm(),
        min: u.min(),
        dissipation,
        step_change,
    }
}

/// Chains `n_steps` resolvent solves starting from `f`.
pub fn evolve(f: &Field, cfg: &EvolutionConfig, op: &HalfLaplacian) -> std::result::Result<Trajectory, EvolutionError> {
    evolve_inner(f, cfg, op, None)
}

/// As [`evolve`], for `u_t + Lambda(W) = s(t)`: step `k` solves the resolvent with datum
/// `u_{k-1} + eps s(t_k)`. Used with exterior sources from prescribed values outside the box.
pub fn evolve_forced(
    f: &Field,
    cfg: &EvolutionConfig,
    op: &HalfLaplacian,
    source: &dyn Fn(f64) -> Field,
) -> std::result::Result<Trajectory, EvolutionError> {
    evolve_inner(f, cfg, op, Some(source))
}

fn evolve_inner(
    f: &Field,
    cfg: &EvolutionConfig,
    op: &HalfLaplacian,
    source: Option<&dyn Fn(f64) -> Field>,
) -> std::result::Result<Trajectory, EvolutionError> {
    cfg.validate()?;
    if f.grid() != op.grid() {
        return Err(Error::GridMismatch.into());
    }
    let eps = cfg.epsilon();
    let mut traj = Trajectory {
        config: *cfg,
        backend: op.backend(),
        times: vec![0.0],
        snapshots: vec![f.clone()],
        reports: Vec::with_capacity(cfg.n_steps),
        series: vec![row(f, cfg.m, 0.0, 0.0, 0.0)],
        failed_at: None,
    };
    let mut current = f.clone();
    for k in 1..=cfg.n_steps {
        let t = k as f64 * eps;
        let datum = match source {
            Some(s) => {
                let st = s(t);
                if st.grid() != f.grid() {
                    return Err(Error::GridMismatch.into());
                }
                current.add(&st.scale(eps)).expect("grid checked")
            }
            None => current.clone(),
        };
        let prob = ResolventProblem::new(eps, cfg.m, &datum, op, cfg.solver);
        let sol = match solve_resolvent(&prob) {
            Ok(s) => s,
            Err(source) => {
                traj.failed_at = Some(k);
                return Err(EvolutionError::StepFailed { step: k, source, partial: Box::new(traj) });
            }
        };
        let dissipation = eps * op.quadratic_form(&sol.w).expect("grid checked");
        let change = sol.u.l1_distance(&current).expect("grid checked");
        traj.series.push(row(&sol.u, cfg.m, t, dissipation, change));
        traj.reports.push(sol.report);
        if k % cfg.snapshot_stride == 0 || k == cfg.n_steps {
            traj.times.push(t);
            traj.snapshots.push(sol.u.clone());
        }
        current = sol.u;
    }
    Ok(traj)
}

/// Exact linear (`m = 1`) evolution: the Poisson semigroup `exp(-t |xi|)`.
pub fn evolve_linear_exact(f: &Field, t: f64, plan: &SpectralPlan) -> Result<Field> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time t = {t} must be nonnegative")));
    }
    if t == 0.0 {
        if f.grid() != plan.grid() {
            return Err(Error::GridMismatch);
        }
        return Ok(f.clone());
    }
    poisson_extend(f, t, plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n_steps: usize,
    pub epsilon: f64,
    /// `||u_eps(T) - u_{eps_prev}(T)||_1` against the previous (coarser) row.
    pub cauchy_difference: Option<f64>,
    /// `||u_eps(T) - u_exact(T)||_1`, when an exact solution is available (`m = 1`, periodic).
    pub exact_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Empirical orders from successive Cauchy differences.
    pub cauchy_orders: Vec<f64>,
    /// Empirical orders from the exact errors.
    pub exact_orders: Vec<f64>,
}

impl ConvergenceTable {
    pub fn differences_decrease(&self) -> bool {
        let d: Vec<f64> = self.rows.iter().filter_map(|r| r.cauchy_difference).collect();
        d.windows(2).all(|w| w[1] <= w[0])
    }
}

fn orders(values: &[(usize, f64)]) -> Vec<f64> {
    values
        .windows(2)
        .map(|w| {
            let ratio = w[1].0 as f64 / w[0].0 as f64;
            (w[0].1 / w[1].1).ln() / ratio.ln()
        })
        .collect()
}

/// Runs [`evolve`] for each step count and tabulates the final-time differences.
pub fn refine_in_epsilon(
    f: &Field,
    cfg: &EvolutionConfig,
    step_counts: &[usize],
    op: &HalfLaplacian,
) -> std::result::Result<ConvergenceTable, EvolutionError> {
    if step_counts.is_empty() || step_counts[0] == 0 {
        return Err(Error::InvalidParameter("empty step counts".into()).into());
    }
    if step_counts.windows(2).any(|w| w[1] <= w[0] || w[1] % w[0] != 0) {
        return Err(Error::InvalidParameter("step counts must increase and nest".into()).into());
    }
    let exact = if cfg.m == 1.0 && op.backend().conserves_mass() {
        Some(evolve_linear_exact(f, cfg.horizon, op.spectral())?)
    } else {
        None
    };
    let mut rows = Vec::new();
    let mut previous: Option<Field> = None;
    for &n in step_counts {
        let c = EvolutionConfig { n_steps: n, snapshot_stride: n, ..*cfg };
        let traj = evolve(f, &c, op)?;
        let last = traj.last().clone();
        let cauchy_difference = previous.as_ref().map(|p| last.l1_distance(p).expect("same grid"));
        let exact_error = exact.as_ref().map(|e| last.l1_distance(e).expect("same grid"));
        rows.push(ConvergenceRow { n_steps: n, epsilon: c.epsilon(), cauchy_difference, exact_error });
        previous = Some(last);
    }
    let cauchy: Vec<(usize, f64)> =
        rows.iter().filter_map(|r| r.cauchy_difference.map(|d| (r.n_steps, d))).collect();
    let errs: Vec<(usize, f64)> = rows.iter().filter_map(|r| r.exact_error.map(|d| (r.n_steps, d))).collect();
    Ok(ConvergenceTable { cauchy_orders: orders(&cauchy), exact_orders: orders(&errs), rows })
}
