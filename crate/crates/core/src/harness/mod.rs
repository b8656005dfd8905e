//! Staged evaluation of external candidate simulators.
//!
//! A candidate is any executable that honours this contract:
//!
//! - `<program> <args..> --check` exits 0 and prints `pphpc-candidate 1`;
//! - `<program> <args..> <14 parameters> <seed>` exits 0 and prints an
//!   output CSV with `iterations + 1` rows on stdout.
//!
//! Candidates are scored 1 to 6 by how far they get:
//!
//! | score | meaning |
//! |-------|---------|
//! | 1 | no runnable artifact |
//! | 2 | handshake failed |
//! | 3 | runtime error or timeout |
//! | 4 | output format violation |
//! | 5 | output statistically different from the baseline |
//! | 6 | output statistically indistinguishable from the baseline |

mod pipeline;
pub mod process;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

pub use pipeline::{
    check_artifact, evaluate_batch, full_evaluation, smoke_test, Baseline, BatchReport, EvalConfig,
    TrialReport,
};

pub const HANDSHAKE: &str = "pphpc-candidate 1";

pub const DEFAULT_SMOKE_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_FULL_TIMEOUT: Duration = Duration::from_secs(3600);

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no candidates to evaluate")]
    NoCandidates,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot read manifest {path}: {source}")]
    ManifestIo {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad manifest: {0}")]
    Manifest(#[from] toml::de::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Score {
    NoArtifact = 1,
    StartupFailure = 2,
    RuntimeFailure = 3,
    FormatViolation = 4,
    StatisticallyDifferent = 5,
    Indistinguishable = 6,
}

impl Score {
    pub fn value(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Pipeline stages, in the order they run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Artifact,
    Handshake,
    SmokeRun,
    SmokeFormat,
    FullRun,
    FullFormat,
    Statistics,
}

impl Stage {
    /// Score given to a candidate that fails this stage.
    pub fn failure_score(self) -> Score {
        match self {
            Stage::Artifact => Score::NoArtifact,
            Stage::Handshake => Score::StartupFailure,
            Stage::SmokeRun | Stage::FullRun => Score::RuntimeFailure,
            Stage::SmokeFormat | Stage::FullFormat => Score::FormatViolation,
            Stage::Statistics => Score::StatisticallyDifferent,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Artifact => "artifact",
            Stage::Handshake => "handshake",
            Stage::SmokeRun => "smoke-run",
            Stage::SmokeFormat => "smoke-format",
            Stage::FullRun => "full-run",
            Stage::FullFormat => "full-format",
            Stage::Statistics => "statistics",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageEntry {
    pub stage: Stage,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for StageEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "pass" } else { "FAIL" };
        write!(f, "{} {} {}", self.stage.name(), verdict, self.detail)
    }
}

/// Final outcome of one candidate trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageScore {
    pub score: Score,
    pub reason: String,
    pub stage_log: Vec<StageEntry>,
}

impl StageScore {
    fn failed(mut log: Vec<StageEntry>, stage: Stage, detail: String) -> StageScore {
        log.push(StageEntry {
            stage,
            passed: false,
            detail: detail.clone(),
        });
        StageScore {
            score: stage.failure_score(),
            reason: detail,
            stage_log: log,
        }
    }
}

/// How to invoke one candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSpec {
    pub id: String,
    pub program: PathBuf,
    /// Fixed arguments placed before the per-call arguments.
    pub args: Vec<String>,
    pub timeout_smoke: Duration,
    pub timeout_full: Duration,
}

impl CandidateSpec {
    pub fn new(id: impl Into<String>, program: impl Into<PathBuf>) -> Self {
        CandidateSpec {
            id: id.into(),
            program: program.into(),
            args: Vec::new(),
            timeout_smoke: DEFAULT_SMOKE_TIMEOUT,
            timeout_full: DEFAULT_FULL_TIMEOUT,
        }
    }

    pub fn with_args<I, S>(mut self, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.args = args.into_iter().map(Into::into).collect();
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.timeout_smoke.is_zero() || self.timeout_full.is_zero() {
            return Err(HarnessError::Config(format!(
                "candidate `{}`: timeouts must be positive",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    id: String,
    program: PathBuf,
    #[serde(default)]
    args: Vec<String>,
    timeout_smoke: Option<f64>,
    timeout_full: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    #[serde(default)]
    candidate: Vec<ManifestEntry>,
}

fn seconds(id: &str, v: Option<f64>, default: Duration) -> Result<Duration, HarnessError> {
    match v {
        None => Ok(default),
        Some(s) if s > 0.0 && s.is_finite() => Ok(Duration::from_secs_f64(s)),
        Some(s) => Err(HarnessError::Config(format!(
            "candidate `{id}`: timeout {s} must be a positive number of seconds"
        ))),
    }
}

/// Parses a TOML candidate manifest:
///
/// ```toml
/// [[candidate]]
/// id = "reference"
/// program = "../target/release/pphpc"   # relative to the manifest
/// args = ["candidate"]
/// timeout_smoke = 30                     # seconds, optional
/// timeout_full = 3600                    # seconds, optional
/// ```
///
/// Relative program paths containing a separator are resolved against
/// `base_dir`; bare names are looked up on `PATH` at run time.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<CandidateSpec>, HarnessError> {
    let manifest: Manifest = toml::from_str(text)?;
    let mut specs = Vec::with_capacity(manifest.candidate.len());
    for e in manifest.candidate {
        let program = if e.program.is_relative() && e.program.components().count() > 1 {
            base_dir.join(&e.program)
        } else {
            e.program
        };
        let spec = CandidateSpec {
            timeout_smoke: seconds(&e.id, e.timeout_smoke, DEFAULT_SMOKE_TIMEOUT)?,
            timeout_full: seconds(&e.id, e.timeout_full, DEFAULT_FULL_TIMEOUT)?,
            id: e.id,
            program,
            args: e.args,
        };
        if specs.iter().any(|s: &CandidateSpec| s.id == spec.id) {
            return Err(HarnessError::Config(format!(
                "duplicate candidate id `{}`",
                spec.id
            )));
        }
        specs.push(spec);
    }
    Ok(specs)
}

pub fn read_manifest(path: &Path) -> Result<Vec<CandidateSpec>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::ManifestIo {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_parsing() {
        let text = r#"
            [[candidate]]
            id = "ref"
            program = "bin/pphpc"
            args = ["candidate"]
            timeout_smoke = 2.5

            [[candidate]]
            id = "other"
            program = "sh"
        "#;
        let specs = parse_manifest(text, Path::new("/opt/m")).unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[0].program, PathBuf::from("/opt/m/bin/pphpc"));
        assert_eq!(specs[0].args, vec!["candidate"]);
        assert_eq!(specs[0].timeout_smoke, Duration::from_millis(2500));
        assert_eq!(specs[0].timeout_full, DEFAULT_FULL_TIMEOUT);
        assert_eq!(specs[1].program, PathBuf::from("sh"));
    }

    #[test]
    fn manifest_errors() {
        let dup = "[[candidate]]\nid='a'\nprogram='x'\n[[candidate]]\nid='a'\nprogram='y'\n";
        assert!(matches!(
            parse_manifest(dup, Path::new(".")),
            Err(HarnessError::Config(_))
        ));
        let neg = "[[candidate]]\nid='a'\nprogram='x'\ntimeout_full=-1\n";
        assert!(matches!(
            parse_manifest(neg, Path::new(".")),
            Err(HarnessError::Config(_))
        ));
        let unknown = "[[candidate]]\nid='a'\nprogram='x'\ncolour='red'\n";
        assert!(matches!(
            parse_manifest(unknown, Path::new(".")),
            Err(HarnessError::Manifest(_))
        ));
    }

    #[test]
    fn stage_failure_scores_are_ordered() {
        let stages = [
            Stage::Artifact,
            Stage::Handshake,
            Stage::SmokeRun,
            Stage::SmokeFormat,
            Stage::Statistics,
        ];
        for w in stages.windows(2) {
            assert!(w[0].failure_score() < w[1].failure_score());
        }
        assert_eq!(Score::Indistinguishable.value(), 6);
    }
}
