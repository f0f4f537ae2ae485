//! Experiment configuration. One TOML document describes a run completely; every
//! output file echoes it back together with [`SCHEMA_VERSION`].

use std::path::{Path, PathBuf};

use fracpme::fractional::{Backend, HalfLaplacian, OperatorOptions, SingularCorrection};
use fracpme::resolvent::SolverSettings;
use fracpme::{GridSpec, Profile};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub operator: OperatorSection,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub suite: SuiteSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub separable: SeparableSection,
    #[serde(default)]
    pub acceptance: AcceptanceSection,
    /// Required by anything that draws random data.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { dim: 1, half_width: 20.0, n: 512 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    pub backend: Backend,
    #[serde(default)]
    pub riesz_correction: SingularCorrection,
    #[serde(default)]
    pub dtn_levels: Option<Vec<f64>>,
}

impl Default for OperatorSection {
    fn default() -> Self {
        Self { backend: Backend::Spectral, riesz_correction: SingularCorrection::default(), dtn_levels: None }
    }
}

impl OperatorSection {
    pub fn options(&self) -> OperatorOptions {
        let mut o = OperatorOptions { riesz_correction: self.riesz_correction, ..OperatorOptions::default() };
        if let Some(levels) = &self.dtn_levels {
            o.dtn_levels = levels.clone();
        }
        o
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub m: f64,
    /// Step size for a single `resolve`.
    #[serde(default)]
    pub epsilon: Option<f64>,
    pub datum: Profile,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self { m: 2.0, epsilon: None, datum: Profile::Gaussian { sigma: 1.0, amplitude: 1.0, center: [0.0; 2] } }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_steps: usize,
    #[serde(default = "one")]
    pub stride: usize,
}

fn one() -> usize {
    1
}

impl Default for TimeSection {
    fn default() -> Self {
        Self { horizon: 1.0, n_steps: 32, stride: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub name: String,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SuiteSection {
    /// Empty means the standard suite: every trajectory check that applies.
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Also write every field as CSV next to the binary file.
    #[serde(default)]
    pub csv: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: PathBuf::from("fracpme-out"), csv: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparableSection {
    pub tau: f64,
    pub extinction_time: f64,
}

impl Default for SeparableSection {
    fn default() -> Self {
        Self { tau: 1.0, extinction_time: 1.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AcceptanceProfile {
    #[default]
    Full,
    /// Reduced resolution with looser tolerances.
    Smoke,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceSection {
    #[serde(default)]
    pub profile: AcceptanceProfile,
    /// Criterion numbers to run; empty runs all of them.
    #[serde(default)]
    pub criteria: Vec<u32>,
    #[serde(default = "yes")]
    pub parallel: bool,
}

fn yes() -> bool {
    true
}

impl Default for AcceptanceSection {
    fn default() -> Self {
        Self { profile: AcceptanceProfile::Full, criteria: Vec::new(), parallel: true }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid: GridSection::default(),
            operator: OperatorSection::default(),
            problem: ProblemSection::default(),
            time: TimeSection::default(),
            solver: SolverSettings::default(),
            suite: SuiteSection::default(),
            output: OutputSection::default(),
            separable: SeparableSection::default(),
            acceptance: AcceptanceSection::default(),
            seed: Some(20240601),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        GridSpec::new(self.grid.dim, self.grid.half_width, self.grid.n).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn operator(&self) -> Result<HalfLaplacian, CliError> {
        HalfLaplacian::new(&self.grid_spec()?, self.operator.backend, &self.operator.options())
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate_problem(&self) -> Result<(), CliError> {
        let m = self.problem.m;
        if !(m.is_finite() && m > 0.0) {
            return Err(CliError::Config(format!("problem.m must be positive, got {m}")));
        }
        self.problem.datum.validate().map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Config("this command draws random data and needs `seed`".into()))
    }
}

/// Header written into every JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub config: &'a ExperimentConfig,
    #[serde(flatten)]
    pub body: T,
}

impl<'a, T: Serialize> Envelope<'a, T> {
    pub fn new(command: &'a str, config: &'a ExperimentConfig, body: T) -> Self {
        Self { schema_version: SCHEMA_VERSION, command, config, body }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = ExperimentConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("[grid]\ndim = 1\nL = 5.0\nn = 32\nspacing = 0.1\n").unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
        assert!(ExperimentConfig::from_toml("colour = 3\n").is_err());
    }

    #[test]
    fn unknown_backend_is_a_config_error() {
        let err = ExperimentConfig::from_toml("[operator]\nbackend = \"wavelet\"\n").unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn partial_documents_take_defaults() {
        let c = ExperimentConfig::from_toml("[problem]\nm = 0.5\n[problem.datum]\nkind = \"bump\"\nradius = 2.0\n").unwrap();
        assert_eq!(c.problem.m, 0.5);
        assert_eq!(c.grid, GridSection::default());
        assert!(matches!(c.problem.datum, Profile::Bump { radius, .. } if radius == 2.0));
    }

    #[test]
    fn nonpositive_m_is_rejected() {
        let mut c = ExperimentConfig::default();
        c.problem.m = 0.0;
        assert!(matches!(c.validate_problem(), Err(CliError::Config(_))));
    }
}
