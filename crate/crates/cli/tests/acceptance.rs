//! Runs every acceptance criterion at its stated resolution and prints one line each.
//! `FRACPME_ACCEPTANCE=smoke` switches to the reduced profile.

use std::process::ExitCode;

use fracpme_cli::acceptance::run_acceptance;
use fracpme_cli::config::{AcceptanceProfile, ExperimentConfig};

fn main() -> ExitCode {
    let profile = match std::env::var("FRACPME_ACCEPTANCE").as_deref() {
        Ok("smoke") => AcceptanceProfile::Smoke,
        _ => AcceptanceProfile::Full,
    };
    let seed = ExperimentConfig::default().seed.expect("default seed");
    println!("acceptance ({profile:?} profile, seed {seed})");
    let outcomes = run_acceptance(profile, &[], seed, true);
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("{}/{} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
