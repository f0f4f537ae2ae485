use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fracpme::analytic::{extinction_profile_solve, SeparableSolution};
use fracpme::diagnostics::{
    check_energy, check_lp_decay, check_mass, check_positivity, check_retention, check_reversed_retention,
    check_time_derivative_bound, default_convex_catalogue, extinction_experiment, fit_smoothing_exponent,
    standard_suite, DiagnosticsReport,
};
use fracpme::evolution::{evolve, evolve_linear_exact, EvolutionConfig, EvolutionError, SeriesRow, Trajectory};
use fracpme::fractional::{operator_selftest, Backend, SpectralPlan};
use fracpme::io::{load_field, save_field, write_fields_csv};
use fracpme::resolvent::{solve_resolvent, ResolventError, ResolventProblem, SolveReport};
use fracpme::{sample, Field, LpExponent};
use serde::{Deserialize, Serialize};

use crate::acceptance::{run_acceptance, CriterionOutcome};
use crate::config::{Envelope, ExperimentConfig, SCHEMA_VERSION};
use crate::CliError;

/// Human-readable result of a successful command.
pub type Summary = String;

fn output_dir(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.output.directory.clone();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, command: &str, cfg: &ExperimentConfig, body: T) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &Envelope::new(command, cfg, body))
        .map_err(|e| CliError::Io(e.to_string()))
}

fn csv_preamble(command: &str, cfg: &ExperimentConfig) -> Result<String, CliError> {
    let echo = serde_json::to_string(cfg).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(format!("# schema_version={SCHEMA_VERSION} command={command}\n# config={echo}\n"))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Binary field file (fixed layout, no header) plus, when configured, a CSV copy with the
/// config echo. Returns the binary file name.
fn write_field(cfg: &ExperimentConfig, command: &str, dir: &Path, stem: &str, field: &Field) -> Result<String, CliError> {
    let name = format!("{stem}.bin");
    save_field(field, &dir.join(&name))?;
    if cfg.output.csv {
        let mut out = create(&dir.join(format!("{stem}.csv")))?;
        out.write_all(csv_preamble(command, cfg)?.as_bytes())?;
        write_fields_csv(&[("u", field)], &mut out)?;
    }
    Ok(name)
}

pub fn selftest(cfg: &ExperimentConfig) -> Result<Summary, CliError> {
    let grid = cfg.grid_spec()?;
    let report = operator_selftest(&grid, &cfg.operator.options())?;
    let dir = output_dir(cfg)?;
    write_json(&dir.join("selftest.json"), "selftest", cfg, &report)?;
    let mut text = String::new();
    for e in &report.entries {
        let _ = writeln!(
            text,
            "{:<40} {:>10.3e} <= {:<8.1e} {}",
            e.name,
            e.relative_error,
            e.tolerance,
            if e.pass { "pass" } else { "FAIL" }
        );
    }
    if report.pass {
        Ok(text)
    } else {
        Err(CliError::Failure(text))
    }
}

#[derive(Serialize)]
struct ResolveBody<'a> {
    solution_file: String,
    report: &'a SolveReport,
    mass: f64,
    sup: f64,
}

pub fn resolve(cfg: &ExperimentConfig) -> Result<Summary, CliError> {
    cfg.validate_problem()?;
    let epsilon = cfg.problem.epsilon.ok_or_else(|| CliError::Config("resolve needs problem.epsilon".into()))?;
    let op = cfg.operator()?;
    let g = sample(op.grid(), &cfg.problem.datum)?;
    let problem = ResolventProblem::new(epsilon, cfg.problem.m, &g, &op, cfg.solver);
    let (solution, converged) = match solve_resolvent(&problem) {
        Ok(s) => (s, true),
        Err(ResolventError::NonConvergence(s)) => (*s, false),
        Err(ResolventError::InvalidProblem(s)) => return Err(CliError::Config(s)),
        Err(e) => return Err(CliError::NonConvergence(e.to_string())),
    };
    let dir = output_dir(cfg)?;
    let file = write_field(cfg, "resolve", &dir, "solution", &solution.u)?;
    let body =
        ResolveBody { solution_file: file, report: &solution.report, mass: solution.u.mass(), sup: solution.u.sup_norm() };
    write_json(&dir.join("solve_report.json"), "resolve", cfg, &body)?;
    let text = format!(
        "{} iterations, residual {:.3e}, mass {:.6e}, sup {:.6e}",
        solution.report.iterations,
        solution.report.final_residual,
        body.mass,
        body.sup
    );
    if converged {
        Ok(text)
    } else {
        Err(CliError::NonConvergence(text))
    }
}

/// What `evolve` records next to the snapshots; `verify` reads it back.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub evolution: EvolutionConfig,
    pub backend: Backend,
    pub times: Vec<f64>,
    pub snapshot_files: Vec<String>,
    pub reports: Vec<SolveReport>,
    pub series: Vec<SeriesRow>,
    pub failed_at: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct EvolveBody {
    trajectory: TrajectoryManifest,
}

#[derive(Deserialize)]
struct SavedTrajectory {
    schema_version: u32,
    trajectory: TrajectoryManifest,
}

fn write_series(path: &Path, command: &str, cfg: &ExperimentConfig, series: &[SeriesRow]) -> Result<(), CliError> {
    let mut out = create(path)?;
    out.write_all(csv_preamble(command, cfg)?.as_bytes())?;
    writeln!(out, "t,mass,L1,L2,Lm+1,Linf,min,dissipation,step_change")?;
    for r in series {
        writeln!(
            out,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.t, r.mass, r.l1, r.l2, r.lm1, r.linf, r.min, r.dissipation, r.step_change
        )?;
    }
    Ok(())
}

pub fn evolve_command(cfg: &ExperimentConfig) -> Result<Summary, CliError> {
    cfg.validate_problem()?;
    let op = cfg.operator()?;
    let f = sample(op.grid(), &cfg.problem.datum)?;
    let evolution = EvolutionConfig::new(cfg.problem.m, cfg.time.horizon, cfg.time.n_steps)
        .with_stride(cfg.time.stride)
        .with_solver(cfg.solver);
    evolution.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let (traj, failure) = match evolve(&f, &evolution, &op) {
        Ok(t) => (t, None),
        Err(EvolutionError::Invalid(e)) => return Err(CliError::Config(e.to_string())),
        Err(EvolutionError::StepFailed { step, source, partial }) => (*partial, Some(format!("step {step}: {source}"))),
    };
    let dir = output_dir(cfg)?;
    let mut files = Vec::with_capacity(traj.snapshots.len());
    for (k, u) in traj.snapshots.iter().enumerate() {
        files.push(write_field(cfg, "evolve", &dir, &format!("snapshot_{k:05}"), u)?);
    }
    write_series(&dir.join("series.csv"), "evolve", cfg, &traj.series)?;
    if cfg.problem.m == 1.0 {
        let mut out = create(&dir.join("exact.csv"))?;
        out.write_all(csv_preamble("evolve", cfg)?.as_bytes())?;
        writeln!(out, "t,l1_error,relative_l1_error")?;
        for (t, u) in traj.times.iter().zip(&traj.snapshots) {
            let exact = evolve_linear_exact(&f, *t, op.spectral())?;
            let e = u.l1_distance(&exact)?;
            writeln!(out, "{t:.17e},{e:.17e},{:.17e}", e / f.l1_norm().max(f64::MIN_POSITIVE))?;
        }
    }
    let manifest = TrajectoryManifest {
        evolution,
        backend: traj.backend,
        times: traj.times.clone(),
        snapshot_files: files,
        reports: traj.reports.clone(),
        series: traj.series.clone(),
        failed_at: traj.failed_at,
    };
    write_json(&dir.join("report.json"), "evolve", cfg, EvolveBody { trajectory: manifest })?;
    let last = traj.series.last().expect("datum row");
    let text = format!(
        "{} steps to t = {:.4}: mass {:.6e}, L1 {:.6e}, sup {:.6e}; {} snapshots in {}",
        traj.completed_steps(),
        last.t,
        last.mass,
        last.l1,
        last.linf,
        traj.snapshots.len(),
        dir.display()
    );
    match failure {
        None => Ok(text),
        Some(why) => Err(CliError::NonConvergence(format!("{why}; partial trajectory written ({text})"))),
    }
}

#[derive(Serialize)]
struct ProfileBody<'a> {
    profile_file: String,
    profile: &'a fracpme::analytic::ExtinctionProfile,
    separable: SeparableSolution,
}

pub fn profile(cfg: &ExperimentConfig) -> Result<Summary, CliError> {
    let grid = cfg.grid_spec()?;
    let p = extinction_profile_solve(&grid, cfg.separable.tau, &SpectralPlan::new(&grid))?;
    let sol = SeparableSolution::new(&p, cfg.separable.extinction_time)?;
    let dir = output_dir(cfg)?;
    let file = write_field(cfg, "profile", &dir, "profile", &p.profile)?;
    write_json(&dir.join("profile.json"), "profile", cfg, ProfileBody { profile_file: file, profile: &p, separable: sol })?;
    Ok(format!("A = {:.6}, residual {:.3e}, ratio spread {:.3e}", p.amplitude, p.residual, p.spread))
}

/// Reads a directory written by `evolve` back into a trajectory.
pub fn load_trajectory(dir: &Path) -> Result<Trajectory, CliError> {
    let path = dir.join("report.json");
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let saved: SavedTrajectory =
        serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    if saved.schema_version != SCHEMA_VERSION {
        return Err(CliError::Io(format!("{}: schema version {}", path.display(), saved.schema_version)));
    }
    let m = saved.trajectory;
    let snapshots = m.snapshot_files.iter().map(|f| load_field(&dir.join(f))).collect::<fracpme::Result<Vec<Field>>>()?;
    if snapshots.is_empty() || snapshots.len() != m.times.len() {
        return Err(CliError::Io(format!("{}: snapshot list does not match the recorded times", path.display())));
    }
    Ok(Trajectory {
        config: m.evolution,
        backend: m.backend,
        times: m.times,
        snapshots,
        reports: m.reports,
        series: m.series,
        failed_at: m.failed_at,
    })
}

pub const CHECK_NAMES: [&str; 9] = [
    "mass",
    "lp-decay",
    "energy",
    "retention",
    "reversed-retention",
    "time-derivative-bound",
    "positivity",
    "extinction",
    "smoothing",
];

/// One named check. `extinction` reads the tolerance as the sup-norm threshold and
/// `smoothing` as the allowed slope deviation over the last decade of the run.
fn named_check(traj: &Trajectory, name: &str, tol: f64) -> Result<DiagnosticsReport, fracpme::Error> {
    match name {
        "mass" => check_mass(traj, tol),
        "lp-decay" => check_lp_decay(
            traj,
            &[LpExponent::Finite(1.0), LpExponent::Finite(2.0), LpExponent::Infinity],
            &default_convex_catalogue(traj.initial()),
            tol,
        ),
        "energy" => check_energy(traj, tol),
        "retention" => check_retention(traj, tol),
        "reversed-retention" => check_reversed_retention(traj, tol),
        "time-derivative-bound" => check_time_derivative_bound(traj, tol),
        "positivity" => {
            let first = traj.times.iter().copied().find(|t| *t > 0.0).unwrap_or(f64::INFINITY);
            check_positivity(traj, first)
        }
        "extinction" => extinction_experiment(traj, tol, 0.05),
        "smoothing" => {
            let horizon = traj.config.horizon;
            fit_smoothing_exponent(traj, (horizon / 10.0, horizon)).map(|fit| fit.report(tol, 0.99, 1.0))
        }
        other => Err(fracpme::Error::InvalidParameter(format!("unknown check `{other}` (known: {})", CHECK_NAMES.join(", ")))),
    }
}

pub fn summary_table(reports: &[DiagnosticsReport]) -> String {
    let mut text = format!("{:<24} {:<6} {:>12} {:>12}\n", "check", "result", "margin", "tolerance");
    for r in reports {
        let result = if r.inconclusive {
            "incon."
        } else if r.pass {
            "pass"
        } else {
            "FAIL"
        };
        let _ = writeln!(text, "{:<24} {:<6} {:>12.3e} {:>12.3e}", r.check, result, r.margin, r.tolerance);
    }
    text
}

pub fn verify(cfg: &ExperimentConfig, dir: &Path) -> Result<Summary, CliError> {
    let traj = load_trajectory(dir)?;
    let reports = if cfg.suite.checks.is_empty() {
        standard_suite(&traj, 1e-6)
    } else {
        let mut reports = Vec::new();
        let mut inapplicable = Vec::new();
        for spec in &cfg.suite.checks {
            match named_check(&traj, &spec.name, spec.tolerance) {
                Ok(r) => reports.push(r),
                Err(fracpme::Error::NotApplicable(why)) => inapplicable.push(format!("{} ({why})", spec.name)),
                Err(e) => return Err(CliError::Config(format!("{}: {e}", spec.name))),
            }
        }
        if !inapplicable.is_empty() {
            return Err(CliError::Config(format!("inapplicable checks: {}", inapplicable.join("; "))));
        }
        reports
    };
    write_json(&dir.join("diagnostics.json"), "verify", cfg, DiagnosticsBody { reports: &reports })?;
    let table = summary_table(&reports);
    if reports.iter().all(|r| r.pass) {
        Ok(table)
    } else {
        Err(CliError::Failure(table))
    }
}

#[derive(Serialize)]
struct DiagnosticsBody<'a> {
    reports: &'a [DiagnosticsReport],
}

#[derive(Serialize)]
struct AcceptanceBody<'a> {
    profile: crate::config::AcceptanceProfile,
    pass: bool,
    criteria: &'a [CriterionOutcome],
}

/// Runs the acceptance criteria and writes `acceptance.json`.
pub fn acceptance(cfg: &ExperimentConfig) -> Result<(Vec<CriterionOutcome>, Summary), CliError> {
    let seed = cfg.require_seed()?;
    if let Some(bad) = cfg.acceptance.criteria.iter().find(|c| !(1..=14).contains(*c)) {
        return Err(CliError::Config(format!("no acceptance criterion {bad}")));
    }
    let outcomes = run_acceptance(cfg.acceptance.profile, &cfg.acceptance.criteria, seed, cfg.acceptance.parallel);
    let pass = outcomes.iter().all(|o| o.pass);
    let dir = output_dir(cfg)?;
    write_json(
        &dir.join("acceptance.json"),
        "acceptance",
        cfg,
        AcceptanceBody { profile: cfg.acceptance.profile, pass, criteria: &outcomes },
    )?;
    let passed = outcomes.iter().filter(|o| o.pass).count();
    let mut text: String = outcomes.iter().map(|o| o.line() + "\n").collect();
    let _ = writeln!(text, "{passed}/{} criteria passed", outcomes.len());
    if pass {
        Ok((outcomes, text))
    } else {
        Err(CliError::Failure(text))
    }
}
