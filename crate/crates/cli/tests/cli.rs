use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use fracpme_cli::config::ExperimentConfig;
use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn fracpme(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracpme")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn shipped_configs_parse() {
    let mut count = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 6);
}

#[test]
fn selftest_default_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fracpme(&["selftest", "--out", s(tmp.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(&tmp.path().join("selftest.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["command"], "selftest");
    assert_eq!(report["config"]["grid"]["n"], 512);
    assert_eq!(report["pass"], true);
}

#[test]
fn selftest_tiny_grid_fails_with_detail() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tiny.toml", "[grid]\ndim = 1\nL = 20.0\nn = 8\n");
    let o = fracpme(&["selftest", "-c", s(&cfg), "--out", s(tmp.path())]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.lines().any(|l| l.starts_with("gaussian-riesz-vs-spectral") && l.ends_with("FAIL")), "{err}");
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("backend.toml", "[operator]\nbackend = \"wavelet\"\n"),
        ("unknown.toml", "[grid]\ndim = 1\nL = 4.0\nn = 16\nwidth = 3\n"),
        ("m.toml", "[problem]\nm = -1.0\n[problem.datum]\nkind = \"gaussian\"\nsigma = 1.0\n"),
    ];
    for (name, text) in cases {
        let cfg = write_config(tmp.path(), name, text);
        for cmd in ["selftest", "evolve"] {
            let o = fracpme(&[cmd, "-c", s(&cfg), "--out", s(tmp.path())]);
            if name == "m.toml" && cmd == "selftest" {
                // the self-test does not look at the problem section
                continue;
            }
            assert_eq!(code(&o), 2, "{name} {cmd}: {}", stderr(&o));
            assert!(stderr(&o).contains("configuration error"), "{}", stderr(&o));
        }
    }
    let o = fracpme(&["selftest", "-c", s(&tmp.path().join("missing.toml"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn quickstart_evolve_then_verify() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let start = Instant::now();
    let o = fracpme(&["evolve", "-c", s(&configs().join("quickstart_m2.toml")), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(start.elapsed().as_secs() < 60);

    let series = std::fs::read_to_string(out.join("series.csv")).unwrap();
    let mut lines = series.lines();
    assert!(lines.next().unwrap().starts_with("# schema_version=1 command=evolve"));
    assert!(lines.next().unwrap().starts_with("# config={"));
    assert_eq!(lines.next().unwrap(), "t,mass,L1,L2,Lm+1,Linf,min,dissipation,step_change");
    assert_eq!(lines.count(), 65);

    let report = json(&out.join("report.json"));
    assert_eq!(report["config"]["problem"]["m"], 2.0);
    let files = report["trajectory"]["snapshot_files"].as_array().unwrap();
    assert_eq!(files.len(), 17);
    assert_eq!(report["trajectory"]["reports"].as_array().unwrap().len(), 64);
    for f in files {
        assert!(out.join(f.as_str().unwrap()).exists());
        let csv = out.join(f.as_str().unwrap().replace(".bin", ".csv"));
        assert!(std::fs::read_to_string(csv).unwrap().starts_with("# schema_version=1"));
    }
    assert!(!out.join("exact.csv").exists());

    let o = fracpme(&["verify", "-c", s(&configs().join("quickstart_m2.toml")), s(&out)]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let diag = json(&out.join("diagnostics.json"));
    let reports = diag["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 5);
    assert!(reports.iter().all(|r| r["pass"] == true));
    assert!(stdout(&o).contains("retention"));
}

#[test]
fn linear_run_writes_exact_comparison() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fracpme(&["evolve", "-c", s(&configs().join("linear_m1.toml")), "--out", s(tmp.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let exact = std::fs::read_to_string(tmp.path().join("exact.csv")).unwrap();
    let rows: Vec<Vec<f64>> = exact
        .lines()
        .skip(3)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 17);
    assert_eq!(rows[0][1], 0.0);
    let last = rows.last().unwrap();
    assert_eq!(last[0], 1.0);
    assert!(last[2] > 0.0 && last[2] < 0.01, "{last:?}");
}

#[test]
fn verify_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fracpme(&["verify", s(&tmp.path().join("nowhere"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("i/o error"), "{}", stderr(&o));

    // retention needs m > 1
    let run = tmp.path().join("fast");
    let cfg = write_config(
        tmp.path(),
        "fast.toml",
        "[grid]\ndim = 1\nL = 8.0\nn = 64\n[problem]\nm = 0.5\n[problem.datum]\nkind = \"gaussian\"\nsigma = 1.0\n\
         [time]\nT = 0.5\nn_steps = 8\n[suite]\nchecks = [{ name = \"energy\", tolerance = 1e-6 }, { name = \"retention\", tolerance = 1e-6 }]\n",
    );
    assert_eq!(code(&fracpme(&["evolve", "-c", s(&cfg), "--out", s(&run)])), 0);
    let o = fracpme(&["verify", "-c", s(&cfg), s(&run)]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("inapplicable checks: retention"), "{err}");
    assert!(!err.contains("energy"), "{err}");

    let cfg = write_config(tmp.path(), "bad.toml", "[suite]\nchecks = [{ name = \"holder\", tolerance = 0.1 }]\n");
    let o = fracpme(&["verify", "-c", s(&cfg), s(&run)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unknown check"));
}

#[test]
fn standard_suite_on_saved_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "run.toml",
        "[grid]\ndim = 1\nL = 8.0\nn = 64\n[problem]\nm = 0.7\n[problem.datum]\nkind = \"gaussian\"\nsigma = 1.0\n\
         [time]\nT = 1.0\nn_steps = 16\nstride = 2\n",
    );
    assert_eq!(code(&fracpme(&["evolve", "-c", s(&cfg), "--out", s(tmp.path())])), 0);
    let o = fracpme(&["verify", "-c", s(&cfg), s(tmp.path())]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let checks: Vec<String> = json(&tmp.path().join("diagnostics.json"))["reports"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["check"].as_str().unwrap().to_string())
        .collect();
    assert!(checks.contains(&"reversed-retention".to_string()), "{checks:?}");
    assert!(!checks.contains(&"retention".to_string()));
}

#[test]
fn identical_configs_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "det.toml",
        "[grid]\ndim = 2\nL = 5.0\nn = 32\n[problem]\nm = 1.5\n[problem.datum]\nkind = \"bump\"\nradius = 2.0\n\
         [time]\nT = 0.5\nn_steps = 8\nstride = 4\n[output]\ndirectory = \"unused\"\n",
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        assert_eq!(code(&fracpme(&["evolve", "-c", s(&cfg), "--out", s(dir)])), 0);
    }
    let name = "snapshot_00002.bin";
    assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    // the CSV preamble echoes the output directory; the data rows must match exactly
    let rows = |d: &std::path::Path| {
        let text = std::fs::read_to_string(d.join("series.csv")).unwrap();
        text.lines().filter(|l| !l.starts_with('#')).map(str::to_string).collect::<Vec<_>>()
    };
    assert_eq!(rows(&a), rows(&b));
    // the reports differ only in the echoed output directory
    let (mut ra, mut rb) = (json(&a.join("report.json")), json(&b.join("report.json")));
    ra["config"]["output"] = Value::Null;
    rb["config"]["output"] = Value::Null;
    assert_eq!(ra, rb);
}

#[test]
fn resolve_command() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fracpme(&["resolve", "-c", s(&configs().join("resolve.toml")), "--out", s(tmp.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&tmp.path().join("solve_report.json"));
    assert_eq!(r["report"]["converged"], true);
    assert!(r["report"]["final_residual"].as_f64().unwrap() <= 1e-9);
    assert!(tmp.path().join("solution.bin").exists());
    assert!(tmp.path().join("solution.csv").exists());

    let cfg = write_config(tmp.path(), "noeps.toml", "[problem]\nm = 2.0\n[problem.datum]\nkind = \"gaussian\"\nsigma = 1.0\n");
    assert_eq!(code(&fracpme(&["resolve", "-c", s(&cfg), "--out", s(tmp.path())])), 2);

    let cfg = write_config(
        tmp.path(),
        "starved.toml",
        "[grid]\ndim = 1\nL = 8.0\nn = 128\n[problem]\nm = 3.0\nepsilon = 1.0\n[problem.datum]\nkind = \"indicator\"\nradius = 1.0\n\
         [solver]\ntol = 1e-12\nmax_iter = 1\narmijo_c1 = 1e-4\nbacktrack = 0.5\n",
    );
    let o = fracpme(&["resolve", "-c", s(&cfg), "--out", s(tmp.path())]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert_eq!(json(&tmp.path().join("solve_report.json"))["report"]["converged"], false);
}

#[test]
fn profile_command() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "p.toml", "[grid]\ndim = 2\nL = 20.0\nn = 128\n[separable]\ntau = 1.0\nextinction_time = 1.5\n");
    let o = fracpme(&["profile", "-c", s(&cfg), "--out", s(tmp.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let p = json(&tmp.path().join("profile.json"));
    let a = p["profile"]["amplitude"].as_f64().unwrap();
    assert!((a - 1.0).abs() < 0.05, "{a}");
    assert!(p["profile"]["residual"].as_f64().unwrap() <= 0.03);
    assert_eq!(p["separable"]["extinction_time"], 1.5);

    let one_d = write_config(tmp.path(), "q.toml", "[grid]\ndim = 1\nL = 20.0\nn = 128\n");
    assert_eq!(code(&fracpme(&["profile", "-c", s(&one_d), "--out", s(tmp.path())])), 2);
}

#[test]
fn acceptance_subset_and_bad_selection() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "acc.toml",
        "seed = 3\n[acceptance]\nprofile = \"smoke\"\ncriteria = [1, 4, 14]\n",
    );
    let o = fracpme(&["acceptance", "-c", s(&cfg), "--out", s(tmp.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("criterion")).count(), 3);
    assert!(text.contains("3/3 criteria passed"));
    let a = json(&tmp.path().join("acceptance.json"));
    assert_eq!(a["pass"], true);
    assert_eq!(a["criteria"].as_array().unwrap().len(), 3);

    let cfg = write_config(tmp.path(), "bad.toml", "seed = 3\n[acceptance]\ncriteria = [15]\n");
    assert_eq!(code(&fracpme(&["acceptance", "-c", s(&cfg), "--out", s(tmp.path())])), 2);
    let cfg = write_config(tmp.path(), "noseed.toml", "[acceptance]\ncriteria = [14]\n");
    assert_eq!(code(&fracpme(&["acceptance", "-c", s(&cfg), "--out", s(tmp.path())])), 2);
}
