//! Executable checks of the qualitative and quantitative properties of the equation.
//!
//! Every check returns a [`DiagnosticsReport`] whose `margin` is the worst normalized
//! violation found (negative values are headroom); `pass` is `margin <= tolerance`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{evolve_linear_exact, Trajectory};
use crate::fractional::{Backend, HalfLaplacian, SpectralPlan};
use crate::grid::{Field, LpExponent};
use crate::resolvent::{solve_resolvent, ResolventProblem, SolverSettings};

/// `m_* = (N - 1) / N`: below it mass is lost and solutions vanish in finite time.
pub fn critical_exponent(dim: usize) -> f64 {
    (dim as f64 - 1.0) / dim as f64
}

/// Smoothing exponent `gamma = (m - 1 + 1/N)^{-1}`.
pub fn smoothing_gamma(m: f64, dim: usize) -> f64 {
    1.0 / (m - 1.0 + 1.0 / dim as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub check: String,
    pub inputs: String,
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default)]
    pub inconclusive: bool,
    #[serde(default)]
    pub measured: BTreeMap<String, f64>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl DiagnosticsReport {
    fn new(check: &str, inputs: String, margin: f64, tolerance: f64) -> Self {
        Self {
            check: check.to_string(),
            inputs,
            margin,
            tolerance,
            pass: margin <= tolerance,
            inconclusive: false,
            measured: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.measured.insert(key.to_string(), value);
        self
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

fn describe(traj: &Trajectory) -> String {
    let g = traj.initial().grid();
    format!(
        "N={} L={} n={} backend={} m={} T={} steps={}",
        g.dim(),
        g.half_width(),
        g.points_per_dim(),
        traj.backend,
        traj.m(),
        traj.config.horizon,
        traj.config.n_steps
    )
}

/// Worst `(s_j - min_{i<j} s_i) / scale` over a series that should not increase.
fn increase_violation(series: &[f64], scale: f64) -> f64 {
    let mut running = f64::INFINITY;
    let mut worst = f64::NEG_INFINITY;
    for &s in series {
        if running.is_finite() {
            worst = worst.max((s - running) / scale);
        }
        running = running.min(s);
    }
    if worst == f64::NEG_INFINITY {
        0.0
    } else {
        worst
    }
}

/// Relative mass drift `max_k |M_k - M_0| / max(|M_0|, floor)`; periodic backends only.
pub fn check_mass(traj: &Trajectory, tol: f64) -> Result<DiagnosticsReport> {
    if !traj.backend.conserves_mass() {
        return Err(Error::NotApplicable(format!(
            "mass check on the {} backend, which loses mass through the exterior",
            traj.backend
        )));
    }
    let m0 = traj.series[0].mass;
    let scale = m0.abs().max(traj.series[0].l1 * 1e-14).max(f64::MIN_POSITIVE);
    let drift = traj.series.iter().map(|r| (r.mass - m0).abs() / scale).fold(0.0, f64::max);
    Ok(DiagnosticsReport::new("mass", describe(traj), drift, tol).with("initial_mass", m0))
}

fn same_schedule(a: &Trajectory, b: &Trajectory) -> Result<()> {
    let ok = a.initial().grid() == b.initial().grid()
        && a.backend == b.backend
        && a.config.m == b.config.m
        && a.config.horizon == b.config.horizon
        && a.config.n_steps == b.config.n_steps
        && a.times == b.times;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter("trajectories differ in grid, backend, m or time schedule".into()))
    }
}

/// L^1 contraction `||u1(t2) - u2(t2)||_1 <= ||u1(t1) - u2(t1)||_1` for all recorded `t1 < t2`,
/// the same for the positive part, and order preservation when the data are ordered.
pub fn check_l1_contraction(a: &Trajectory, b: &Trajectory, tol: f64) -> Result<DiagnosticsReport> {
    same_schedule(a, b)?;
    let diffs: Vec<Field> =
        a.snapshots.iter().zip(&b.snapshots).map(|(x, y)| x.sub(y).expect("same grid")).collect();
    let l1: Vec<f64> = diffs.iter().map(Field::l1_norm).collect();
    let plus: Vec<f64> = diffs.iter().map(Field::positive_part_l1).collect();
    let minus: Vec<f64> = diffs.iter().map(|d| d.scale(-1.0).positive_part_l1()).collect();
    let floor = (a.series[0].l1 + b.series[0].l1) * 1e-14;
    let scale = l1[0].max(floor).max(f64::MIN_POSITIVE);
    let contraction = increase_violation(&l1, scale);
    let positive = increase_violation(&plus, scale).max(increase_violation(&minus, scale));
    let mut margin = contraction.max(positive);
    let mut report_notes = Vec::new();

    let (f1, f2) = (a.initial(), b.initial());
    let order = if f1.values().iter().zip(f2.values()).all(|(x, y)| x <= y) {
        Some(1.0)
    } else if f1.values().iter().zip(f2.values()).all(|(x, y)| x >= y) {
        Some(-1.0)
    } else {
        None
    };
    let mut order_violation = f64::NAN;
    if let Some(sign) = order {
        let sup = f1.sup_norm().max(f2.sup_norm()).max(f64::MIN_POSITIVE);
        order_violation = diffs.iter().map(|d| d.values().iter().map(|v| sign * v).fold(0.0, f64::max)).fold(0.0, f64::max)
            / sup;
        margin = margin.max(order_violation);
        report_notes.push("data ordered: order preservation checked pointwise".to_string());
    }
    let mut r = DiagnosticsReport::new("l1-contraction", describe(a), margin, tol)
        .with("initial_distance", l1[0])
        .with("final_distance", *l1.last().expect("nonempty"))
        .with("contraction_violation", contraction)
        .with("positive_part_violation", positive);
    if order.is_some() {
        r = r.with("order_violation", order_violation);
    }
    r.notes = report_notes;
    Ok(r)
}

/// Convex functionals `int Psi(u)` that must not increase along the flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConvexFunctional {
    /// `|s|^p`.
    Power { p: f64 },
    /// `((s - c)_+)^2`.
    ShiftedSquare { c: f64 },
    /// `exp(|s|) - 1`.
    ExpMinusOne,
}

impl ConvexFunctional {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            ConvexFunctional::Power { p } => s.abs().powf(p),
            ConvexFunctional::ShiftedSquare { c } => (s - c).max(0.0).powi(2),
            ConvexFunctional::ExpMinusOne => s.abs().exp_m1(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            ConvexFunctional::Power { p } => format!("|s|^{p}"),
            ConvexFunctional::ShiftedSquare { c } => format!("(s-{c})_+^2"),
            ConvexFunctional::ExpMinusOne => "exp|s|-1".to_string(),
        }
    }

    pub fn integral(&self, u: &Field) -> f64 {
        u.grid().cell_volume() * u.values().iter().map(|&v| self.eval(v)).sum::<f64>()
    }
}

/// The catalogue checked by default: `|s|^2`, `(s - c)_+^2` at half the initial maximum,
/// and `exp|s| - 1`.
pub fn default_convex_catalogue(f: &Field) -> Vec<ConvexFunctional> {
    vec![
        ConvexFunctional::Power { p: 2.0 },
        ConvexFunctional::ShiftedSquare { c: 0.5 * f.max() },
        ConvexFunctional::ExpMinusOne,
    ]
}

/// `||u_k||_p` and `int Psi(u_k)` nonincreasing over the recorded snapshots.
pub fn check_lp_decay(
    traj: &Trajectory,
    exponents: &[LpExponent],
    convex: &[ConvexFunctional],
    tol: f64,
) -> Result<DiagnosticsReport> {
    let mut margin = f64::NEG_INFINITY;
    let mut measured = BTreeMap::new();
    for &p in exponents {
        let series = traj.snapshots.iter().map(|u| u.lp_norm(p)).collect::<Result<Vec<f64>>>()?;
        let v = increase_violation(&series, series[0].max(f64::MIN_POSITIVE));
        let key = match p {
            LpExponent::Finite(p) => format!("L{p}"),
            LpExponent::Infinity => "Linf".to_string(),
        };
        measured.insert(key, v);
        margin = margin.max(v);
    }
    for psi in convex {
        let series: Vec<f64> = traj.snapshots.iter().map(|u| psi.integral(u)).collect();
        let v = increase_violation(&series, series[0].max(f64::MIN_POSITIVE));
        measured.insert(psi.name(), v);
        margin = margin.max(v);
    }
    let mut r = DiagnosticsReport::new("lp-decay", describe(traj), margin.max(0.0), tol);
    r.measured = measured;
    Ok(r)
}

fn nonnegative(traj: &Trajectory) -> Result<()> {
    if traj.initial().min() < 0.0 {
        return Err(Error::NotApplicable("retention needs a nonnegative datum".into()));
    }
    Ok(())
}

/// Pairs of recorded positive times `(i, j)`, `t_i < t_j`.
fn positive_pairs(traj: &Trajectory) -> impl Iterator<Item = (usize, usize)> + '_ {
    let k = traj.times.len();
    (1..k).flat_map(move |i| (i + 1..k).map(move |j| (i, j)))
}

/// Retention `u(t2) >= (t1/t2)^{1/(m-1)} u(t1)` for `m > 1`, pointwise over recorded pairs.
pub fn check_retention(traj: &Trajectory, tol: f64) -> Result<DiagnosticsReport> {
    let m = traj.m();
    if m <= 1.0 {
        return Err(Error::NotApplicable(format!("retention needs m > 1, got m = {m}")));
    }
    nonnegative(traj)?;
    let scale = traj.initial().sup_norm().max(f64::MIN_POSITIVE);
    let mut worst = f64::NEG_INFINITY;
    for (i, j) in positive_pairs(traj) {
        let factor = (traj.times[i] / traj.times[j]).powf(1.0 / (m - 1.0));
        let (a, b) = (&traj.snapshots[i], &traj.snapshots[j]);
        for (x, y) in a.values().iter().zip(b.values()) {
            worst = worst.max((factor * x - y) / scale);
        }
    }
    Ok(DiagnosticsReport::new("retention", describe(traj), worst.max(0.0), tol)
        .with("worst_violation", worst)
        .note("u(t2) >= (t1/t2)^(1/(m-1)) u(t1) over recorded pairs of positive times"))
}

/// The `m < 1` form `u_t <= u / ((1 - m) t)`, integrated: `u(t2) <= (t2/t1)^{1/(1-m)} u(t1)`.
pub fn check_reversed_retention(traj: &Trajectory, tol: f64) -> Result<DiagnosticsReport> {
    let m = traj.m();
    if m >= 1.0 {
        return Err(Error::NotApplicable(format!("the reversed bound needs m < 1, got m = {m}")));
    }
    nonnegative(traj)?;
    let scale = traj.initial().sup_norm().max(f64::MIN_POSITIVE);
    let mut worst = f64::NEG_INFINITY;
    for (i, j) in positive_pairs(traj) {
        let factor = (traj.times[j] / traj.times[i]).powf(1.0 / (1.0 - m));
        let (a, b) = (&traj.snapshots[i], &traj.snapshots[j]);
        for (x, y) in a.values().iter().zip(b.values()) {
            worst = worst.max((y - factor * x) / scale);
        }
    }
    Ok(DiagnosticsReport::new("reversed-retention", describe(traj), worst.max(0.0), tol)
        .with("worst_violation", worst)
        .note("u(t2) <= (t2/t1)^(1/(1-m)) u(t1) over recorded pairs of positive times"))
}

/// `||u_{k+1} - u_k||_1 / eps <= 2 ||f||_1 / (|m - 1| t_k) (1 + tol)` for `k >= 1`.
pub fn check_time_derivative_bound(traj: &Trajectory, tol: f64) -> Result<DiagnosticsReport> {
    let m = traj.m();
    if m == 1.0 {
        return Err(Error::NotApplicable("the time-derivative bound needs m != 1".into()));
    }
    let eps = traj.epsilon();
    let f1 = traj.series[0].l1;
    let mut worst = f64::NEG_INFINITY;
    for k in 1..traj.series.len() - 1 {
        let lhs = traj.series[k + 1].step_change / eps;
        let rhs = 2.0 * f1 / ((m - 1.0).abs() * traj.series[k].t);
        if rhs > 0.0 {
            worst = worst.max(lhs / rhs - 1.0);
        }
    }
    if worst == f64::NEG_INFINITY {
        worst = -1.0;
    }
    Ok(DiagnosticsReport::new("time-derivative-bound", describe(traj), worst, tol).with("worst_ratio", worst + 1.0))
}

/// Per-step decrease of `||u_k||_{m+1}` and the cumulative energy inequality
/// `sum_k eps <W_k, Lambda W_k> + ||u_n||^{m+1}_{m+1}/(m+1) <= ||f||^{m+1}_{m+1}/(m+1)`,
/// both relative to `||f||^{m+1}_{m+1}/(m+1)`.
pub fn check_energy(traj: &Trajectory, tol: f64) -> Result<DiagnosticsReport> {
    let m = traj.m();
    let energy = |norm: f64| norm.powf(m + 1.0) / (m + 1.0);
    let e0 = energy(traj.series[0].lm1);
    let scale = e0.max(f64::MIN_POSITIVE);
    let mut step = f64::NEG_INFINITY;
    let mut dissipated = 0.0;
    let mut cumulative = f64::NEG_INFINITY;
    for w in traj.series.windows(2) {
        step = step.max((energy(w[1].lm1) - energy(w[0].lm1)) / scale);
        dissipated += w[1].dissipation;
        cumulative = cumulative.max((dissipated + energy(w[1].lm1) - e0) / scale);
    }
    let margin = step.max(cumulative);
    Ok(DiagnosticsReport::new("energy", describe(traj), if margin.is_finite() { margin } else { 0.0 }, tol)
        .with("worst_step_increase", step)
        .with("cumulative_excess", cumulative)
        .with("dissipated", dissipated)
        .with("initial_energy", e0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingFit {
    pub m: f64,
    pub dim: usize,
    pub fitted_slope: f64,
    pub fit_window: (f64, f64),
    pub r_squared: f64,
    pub points: usize,
    /// `max_window sup|u(t)| t^gamma / ||f||_1^{gamma/N}`.
    pub measured_constant: f64,
}

impl SmoothingFit {
    pub fn gamma_theory(&self) -> f64 {
        smoothing_gamma(self.m, self.dim)
    }

    /// Pass iff `|slope + gamma| <= slope_tol`; inconclusive (and not passing) when the fit
    /// is poor or covers less than `min_decades` of time.
    pub fn report(&self, slope_tol: f64, r2_min: f64, min_decades: f64) -> DiagnosticsReport {
        let deviation = (self.fitted_slope + self.gamma_theory()).abs();
        let decades = (self.fit_window.1 / self.fit_window.0).log10();
        let mut r = DiagnosticsReport::new(
            "smoothing-exponent",
            format!("N={} m={} window=[{}, {}]", self.dim, self.m, self.fit_window.0, self.fit_window.1),
            deviation,
            slope_tol,
        )
        .with("gamma_theory", self.gamma_theory())
        .with("fitted_slope", self.fitted_slope)
        .with("r_squared", self.r_squared)
        .with("decades", decades)
        .with("measured_constant", self.measured_constant);
        if self.r_squared < r2_min || decades < min_decades - 1e-12 {
            r.inconclusive = true;
            r.pass = false;
            r = r.note("decay regime not established in the window: inconclusive");
        }
        r
    }
}

/// Least-squares slope of `log y` against `log t` and its `r^2`.
pub fn log_log_fit(times: &[f64], values: &[f64]) -> (f64, f64) {
    let xs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

fn smoothing_fit(m: f64, dim: usize, f_l1: f64, times: &[f64], sups: &[f64], window: (f64, f64)) -> Result<SmoothingFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!("fit window [{lo}, {hi}]")));
    }
    let (t, s): (Vec<f64>, Vec<f64>) =
        times.iter().zip(sups).filter(|(t, _)| **t >= lo * (1.0 - 1e-12) && **t <= hi * (1.0 + 1e-12)).unzip();
    if t.len() < 3 {
        return Err(Error::InvalidParameter(format!("fit window [{lo}, {hi}] holds {} samples", t.len())));
    }
    let (slope, r2) = log_log_fit(&t, &s);
    let gamma = smoothing_gamma(m, dim);
    let constant =
        t.iter().zip(&s).map(|(t, s)| s * t.powf(gamma) / f_l1.powf(gamma / dim as f64)).fold(0.0, f64::max);
    Ok(SmoothingFit {
        m,
        dim,
        fitted_slope: slope,
        fit_window: (t[0], t[t.len() - 1]),
        r_squared: r2,
        points: t.len(),
        measured_constant: constant,
    })
}

/// Fits the decay of `||u(t)||_inf` over `window` on a computed trajectory (`m > m_*`).
pub fn fit_smoothing_exponent(traj: &Trajectory, window: (f64, f64)) -> Result<SmoothingFit> {
    let dim = traj.initial().grid().dim();
    let m = traj.m();
    if m <= critical_exponent(dim) {
        return Err(Error::NotApplicable(format!("smoothing needs m > m_* = {}", critical_exponent(dim))));
    }
    let times: Vec<f64> = traj.series.iter().map(|r| r.t).collect();
    let sups: Vec<f64> = traj.series.iter().map(|r| r.linf).collect();
    smoothing_fit(m, dim, traj.series[0].l1, &times[1..], &sups[1..], window)
}

/// Same fit for the exact linear flow sampled at `times`.
pub fn fit_smoothing_linear_exact(f: &Field, plan: &SpectralPlan, times: &[f64], window: (f64, f64)) -> Result<SmoothingFit> {
    let sups = times.iter().map(|&t| evolve_linear_exact(f, t, plan).map(|u| u.sup_norm())).collect::<Result<Vec<f64>>>()?;
    smoothing_fit(1.0, f.grid().dim(), f.l1_norm(), times, &sups, window)
}

/// Extrapolated vanishing time from `sup^{1-m}`, which is affine in `t` near extinction.
pub fn extrapolate_vanishing_time(times: &[f64], sups: &[f64], m: f64) -> Option<f64> {
    let s: Vec<f64> = sups.iter().map(|v| v.powf(1.0 - m)).collect();
    let s0 = s[0];
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (t, v) in times.iter().zip(&s) {
        if *v <= 0.6 * s0 && *v >= 0.1 * s0 {
            xs.push(*t);
            ys.push(*v);
        }
    }
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    if slope >= 0.0 {
        return None;
    }
    Some(mx - my / slope)
}

/// Extinction below `m_*` in two dimensions: `J = int |u|^{pm+1}` with `p = (N(1-m)-1)/m`
/// must decrease strictly, with `(J_{k+1} - J_k) / (eps J_k^{(N-1)/N}) <= -C < 0` over the
/// bulk of the run (`J_k >= bulk_floor J_0`), and `sup |u|` must drop below `sup_threshold`.
pub fn extinction_experiment(traj: &Trajectory, sup_threshold: f64, bulk_floor: f64) -> Result<DiagnosticsReport> {
    let dim = traj.initial().grid().dim();
    let m = traj.m();
    let m_star = critical_exponent(dim);
    if dim != 2 || m >= m_star {
        return Err(Error::NotApplicable(format!("extinction needs N = 2 and m < m_* = {m_star}; got N = {dim}, m = {m}")));
    }
    if traj.snapshots.len() != traj.series.len() {
        return Err(Error::InvalidParameter("extinction experiment needs every step recorded".into()));
    }
    let p = (dim as f64 * (1.0 - m) - 1.0) / m;
    let q = p * m + 1.0;
    let exponent = (dim as f64 - 1.0) / dim as f64;
    let j: Vec<f64> = traj.snapshots.iter().map(|u| u.lp_integral(q)).collect();
    let eps = traj.epsilon();
    let tiny = j[0] * 1e-12;
    let mut strictly = true;
    let mut worst_ratio = f64::NEG_INFINITY;
    for k in 0..j.len() - 1 {
        if j[k] <= tiny {
            break;
        }
        if j[k + 1] >= j[k] {
            strictly = false;
        }
        if j[k + 1] >= bulk_floor * j[0] {
            worst_ratio = worst_ratio.max((j[k + 1] - j[k]) / (eps * j[k].powf(exponent)));
        }
    }
    let sups: Vec<f64> = traj.series.iter().map(|r| r.linf).collect();
    let times: Vec<f64> = traj.series.iter().map(|r| r.t).collect();
    let below = sups.iter().position(|&s| s < sup_threshold);
    let c = -worst_ratio;
    let mut r = DiagnosticsReport::new(
        "extinction",
        describe(traj),
        // fails if J is not strictly decreasing, if C <= 0, or if the sup stays above threshold
        if strictly && c > 0.0 && below.is_some() { -c } else { c.abs().max(1.0) },
        0.0,
    )
    .with("p", p)
    .with("measured_C", c)
    .with("J0", j[0])
    .with("strictly_decreasing", if strictly { 1.0 } else { 0.0 });
    if let Some(k) = below {
        r = r.with("time_sup_below_threshold", times[k]);
    }
    if let Some(t) = extrapolate_vanishing_time(&times, &sups, m) {
        r = r.with("extrapolated_vanishing_time", t);
    }
    Ok(r)
}

/// `min u(t) > 0` at every recorded `t >= t_min`.
pub fn check_positivity(traj: &Trajectory, t_min: f64) -> Result<DiagnosticsReport> {
    if traj.initial().min() < 0.0 {
        return Err(Error::NotApplicable("positivity needs a nonnegative datum".into()));
    }
    let mut lowest = f64::INFINITY;
    let mut r = DiagnosticsReport::new("positivity", describe(traj), 0.0, -f64::MIN_POSITIVE);
    let mut count = 0;
    for (t, u) in traj.times.iter().zip(&traj.snapshots) {
        if *t >= t_min && *t > 0.0 {
            let v = u.min();
            if count < 8 {
                r.measured.insert(format!("min_at_t={t:.6}"), v);
            }
            count += 1;
            lowest = lowest.min(v);
        }
    }
    if count == 0 {
        return Err(Error::InvalidParameter(format!("no recorded time at or after {t_min}")));
    }
    r.margin = -lowest;
    r.pass = r.margin <= r.tolerance;
    Ok(r.with("lowest_min", lowest))
}

/// Resolvent distances `||u_{m_n} - u_{m_bar}||_1` along a ladder `m_n -> m_bar`: must
/// decrease, and the last must be at most `tol ||g||_1`.
pub fn continuous_dependence_sweep(
    g: &Field,
    m_values: &[f64],
    m_bar: f64,
    epsilon: f64,
    op: &HalfLaplacian,
    settings: SolverSettings,
    tol: f64,
) -> Result<DiagnosticsReport> {
    let m_star = critical_exponent(g.grid().dim());
    if let Some(bad) = m_values.iter().chain([&m_bar]).find(|&&m| m <= m_star) {
        return Err(Error::NotApplicable(format!("m = {bad} not above m_* = {m_star}")));
    }
    if m_values.is_empty() {
        return Err(Error::InvalidParameter("empty m ladder".into()));
    }
    let solve = |m: f64| {
        solve_resolvent(&ResolventProblem::new(epsilon, m, g, op, settings))
            .map(|s| s.u)
            .map_err(|e| Error::InvalidParameter(format!("resolvent at m = {m}: {e}")))
    };
    let reference = solve(m_bar)?;
    let norm = g.l1_norm().max(f64::MIN_POSITIVE);
    let mut distances = Vec::with_capacity(m_values.len());
    for &m in m_values {
        distances.push(solve(m)?.l1_distance(&reference)?);
    }
    let monotone = distances.windows(2).all(|w| w[1] < w[0]) || distances.len() == 1;
    let last = distances[distances.len() - 1] / norm;
    let mut r = DiagnosticsReport::new(
        "continuous-dependence",
        format!("m_bar={m_bar} ladder={m_values:?} eps={epsilon} backend={}", op.backend()),
        if monotone { last } else { f64::INFINITY },
        tol,
    );
    for (m, d) in m_values.iter().zip(&distances) {
        r.measured.insert(format!("distance_at_m={m}"), d / norm);
    }
    if !monotone {
        r = r.note("distances do not decrease along the ladder");
    }
    Ok(r)
}

/// `F(x) / G(x)` with `F = (x^m - 1)(x - 1)`, `G = (x^{(m+1)/2} - 1)^2`, accurate near `x = 1`.
pub fn calculus_ratio_minus(x: f64, m: f64) -> f64 {
    let l = x.ln();
    let f = (m * l).exp_m1() * l.exp_m1();
    let g = (0.5 * (m + 1.0) * l).exp_m1().powi(2);
    f / g
}

/// `(x^m + 1)(x + 1) / (x^{(m+1)/2} + 1)^2`.
pub fn calculus_ratio_plus(x: f64, m: f64) -> f64 {
    (x.powf(m) + 1.0) * (x + 1.0) / (x.powf(0.5 * (m + 1.0)) + 1.0).powi(2)
}

/// Deterministic samples in `(1, 10^6]`, clustered near 1 in `log x`.
pub fn calculus_samples(count: usize) -> Vec<f64> {
    let top = 1e6f64.ln();
    (1..=count).map(|i| (top * (i as f64 / count as f64).powi(3)).exp()).collect()
}

/// Full linear convolution of finitely supported sequences starting at index 0.
pub fn convolve_sequences(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `sum (h * (eta * eta)) g` and `sum (h * eta)(g * eta)` for a symmetric kernel `eta` of
/// odd length centered at its middle entry.
pub fn convolution_identity_sides(h: &[f64], g: &[f64], eta: &[f64]) -> (f64, f64) {
    let r = eta.len() / 2;
    let rho = convolve_sequences(eta, eta);
    // h * rho is offset by 2r, h * eta and g * eta by r
    let lhs_seq = convolve_sequences(h, &rho);
    let lhs: f64 = g.iter().enumerate().map(|(t, gv)| gv * lhs_seq[t + 2 * r]).sum();
    let he = convolve_sequences(h, eta);
    let ge = convolve_sequences(g, eta);
    let rhs: f64 = he.iter().zip(&ge).map(|(a, b)| a * b).sum();
    (lhs, rhs)
}

/// The calculus inequalities (with a 0.99 guard on `min(1, 4m/(m+1)^2)`) and the
/// convolution identity on seeded random sequences.
pub fn appendix_checks(m_values: &[f64], sample_count: usize, seed: u64) -> DiagnosticsReport {
    let xs = calculus_samples(sample_count);
    let mut worst = f64::NEG_INFINITY;
    let mut measured = BTreeMap::new();
    for &m in m_values {
        let bound = 0.99 * (4.0 * m / (m + 1.0).powi(2)).min(1.0);
        let lo_minus = xs.iter().map(|&x| calculus_ratio_minus(x, m)).fold(f64::INFINITY, f64::min);
        let lo_plus = xs.iter().map(|&x| calculus_ratio_plus(x, m)).fold(f64::INFINITY, f64::min);
        measured.insert(format!("min_ratio_minus_m={m}"), lo_minus);
        measured.insert(format!("min_ratio_plus_m={m}"), lo_plus);
        worst = worst.max((bound - lo_minus) / bound).max((bound - lo_plus) / bound);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eta = [1.0, 2.0, 3.0, 2.0, 1.0].map(|v| v / 9.0);
    let mut identity = 0.0f64;
    for _ in 0..16 {
        let h: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (l, r) = convolution_identity_sides(&h, &g, &eta);
        let scale = h.iter().map(|v| v.abs()).sum::<f64>() * g.iter().map(|v| v.abs()).sum::<f64>();
        identity = identity.max((l - r).abs() / scale);
    }
    measured.insert("convolution_identity_error".into(), identity);
    // the identity error is held to 1e-12 by mapping it onto the ratio scale
    let margin = worst.max(identity / 1e-12 - 1.0);
    let mut r = DiagnosticsReport::new(
        "appendix",
        format!("m={m_values:?} samples={sample_count} seed={seed}"),
        margin,
        0.0,
    );
    r.measured = measured;
    r
}

/// Runs the trajectory checks that apply to `traj`, skipping the inapplicable ones.
pub fn standard_suite(traj: &Trajectory, tol: f64) -> Vec<DiagnosticsReport> {
    let mut out = Vec::new();
    if traj.backend == Backend::Spectral || traj.backend == Backend::ExtensionDtN {
        out.extend(check_mass(traj, tol).ok());
    }
    out.extend(
        check_lp_decay(
            traj,
            &[LpExponent::Finite(1.0), LpExponent::Finite(2.0), LpExponent::Infinity],
            &default_convex_catalogue(traj.initial()),
            tol,
        )
        .ok(),
    );
    out.extend(check_energy(traj, tol).ok());
    out.extend(check_retention(traj, tol).ok());
    out.extend(check_reversed_retention(traj, tol).ok());
    out.extend(check_time_derivative_bound(traj, tol).ok());
    out
}
