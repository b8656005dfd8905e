use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Duration;

use rayon::prelude::*;

use super::process::{resolve_program, run_with_timeout, Exit, ProcessOutcome};
use super::{CandidateSpec, HarnessError, Score, Stage, StageEntry, StageScore, HANDSHAKE};
use crate::bench::summarize_times;
use crate::io::{read_output_csv, PValueRow, ResultRow, TimingRow};
use crate::params::SimParams;
use crate::rng::derive_seed;
use crate::sim::SimOutput;
use crate::stats::{
    bh_adjust, paramset_test, success_rate, CompareConfig, ParamsetTest, ParamsetVerdict,
};

#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Named parameter sets; the smoke test uses the first one.
    pub paramsets: Vec<(String, SimParams)>,
    /// Full replications per parameter set.
    pub n_reps: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub smoke_iterations: u32,
    pub stats: CompareConfig,
    /// Worker threads for replications. Results do not depend on it.
    pub jobs: usize,
}

impl EvalConfig {
    pub fn new(paramsets: Vec<(String, SimParams)>) -> Self {
        EvalConfig {
            paramsets,
            n_reps: 30,
            trials: 6,
            base_seed: 0,
            smoke_iterations: 5,
            stats: CompareConfig::default(),
            jobs: 1,
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.paramsets.is_empty() {
            return Err(HarnessError::Config(
                "at least one parameter set is required".into(),
            ));
        }
        if self.n_reps == 0 || self.trials == 0 {
            return Err(HarnessError::Config(
                "replications and trials must be at least 1".into(),
            ));
        }
        for (name, p) in &self.paramsets {
            p.validate()
                .map_err(|e| HarnessError::Config(format!("parameter set {name}: {e}")))?;
        }
        Ok(())
    }

    /// Trial seed: shared by every candidate so trials are comparable.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        derive_seed(self.base_seed, trial as u64)
    }

    /// Seed of replication `rep` of parameter set `paramset` in a trial.
    pub fn replication_seed(trial_seed: u64, paramset: usize, rep: usize) -> u64 {
        derive_seed(derive_seed(trial_seed, paramset as u64), rep as u64)
    }
}

/// Reference runs, one group per parameter set (same order as the config).
#[derive(Debug, Clone)]
pub struct Baseline {
    pub runs: Vec<Vec<SimOutput>>,
    /// Mean replication time per parameter set, when known.
    pub mean_times: Option<Vec<f64>>,
}

impl Baseline {
    fn validate(&self, config: &EvalConfig) -> Result<(), HarnessError> {
        if self.runs.len() != config.paramsets.len() {
            return Err(HarnessError::Config(format!(
                "baseline has {} parameter sets, configuration has {}",
                self.runs.len(),
                config.paramsets.len()
            )));
        }
        for ((name, params), runs) in config.paramsets.iter().zip(&self.runs) {
            if runs.is_empty() {
                return Err(HarnessError::Config(format!(
                    "baseline for {name} is empty"
                )));
            }
            let expected = params.iterations as usize + 1;
            if let Some(bad) = runs.iter().find(|r| r.len() != expected) {
                return Err(HarnessError::Config(format!(
                    "baseline run for {name} has {} rows, expected {expected}",
                    bad.len()
                )));
            }
        }
        Ok(())
    }
}

fn pass(stage: Stage, detail: impl Into<String>) -> StageEntry {
    StageEntry {
        stage,
        passed: true,
        detail: detail.into(),
    }
}

fn call_args(spec: &CandidateSpec, params: &SimParams, seed: u64) -> Vec<String> {
    let mut args = spec.args.clone();
    args.extend(params.values().iter().map(|v| v.to_string()));
    args.push(seed.to_string());
    args
}

fn failure_detail(outcome: &ProcessOutcome, timeout: Duration) -> String {
    let mut detail = match &outcome.exit {
        Exit::TimedOut => format!("timed out after {:.1}s", timeout.as_secs_f64()),
        Exit::Failed(s) => s.clone(),
        Exit::SpawnFailed(e) => format!("could not start: {e}"),
        Exit::Success => String::new(),
    };
    let tail = outcome.stderr_tail();
    if !tail.is_empty() {
        let _ = write!(detail, " ({tail})");
    }
    detail
}

fn resolved(spec: &CandidateSpec) -> Option<PathBuf> {
    resolve_program(&spec.program)
}

/// Checks that the candidate exists and answers the `--check` probe with
/// the handshake line.
pub fn check_artifact(spec: &CandidateSpec) -> Result<Vec<StageEntry>, StageScore> {
    let Some(program) = resolved(spec) else {
        return Err(StageScore::failed(
            Vec::new(),
            Stage::Artifact,
            format!("program not found: {}", spec.program.display()),
        ));
    };
    let mut args = spec.args.clone();
    args.push("--check".into());
    let outcome = run_with_timeout(&program, &args, spec.timeout_smoke);
    if let Exit::SpawnFailed(e) = &outcome.exit {
        return Err(StageScore::failed(
            Vec::new(),
            Stage::Artifact,
            format!("cannot execute {}: {e}", program.display()),
        ));
    }
    let log = vec![pass(Stage::Artifact, program.display().to_string())];
    if outcome.exit != Exit::Success {
        let detail = format!(
            "probe failed: {}",
            failure_detail(&outcome, spec.timeout_smoke)
        );
        return Err(StageScore::failed(log, Stage::Handshake, detail));
    }
    let stdout = String::from_utf8_lossy(&outcome.stdout);
    let first = stdout
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("");
    if first != HANDSHAKE {
        let shown: String = first.chars().take(80).collect();
        return Err(StageScore::failed(
            log,
            Stage::Handshake,
            format!("expected handshake `{HANDSHAKE}`, got `{shown}`"),
        ));
    }
    let mut log = log;
    log.push(pass(Stage::Handshake, HANDSHAKE));
    Ok(log)
}

/// Runs the candidate once with `params` and checks the output format.
pub fn smoke_test(
    spec: &CandidateSpec,
    params: &SimParams,
    seed: u64,
) -> Result<Vec<StageEntry>, StageScore> {
    let program = resolved(spec).unwrap_or_else(|| spec.program.clone());
    let outcome = run_with_timeout(&program, &call_args(spec, params, seed), spec.timeout_smoke);
    if outcome.exit != Exit::Success {
        return Err(StageScore::failed(
            Vec::new(),
            Stage::SmokeRun,
            format!(
                "smoke run: {}",
                failure_detail(&outcome, spec.timeout_smoke)
            ),
        ));
    }
    let log = vec![pass(
        Stage::SmokeRun,
        format!(
            "{} iterations in {:.3}s",
            params.iterations,
            outcome.elapsed.as_secs_f64()
        ),
    )];
    let expected = params.iterations as usize + 1;
    if let Err(e) = read_output_csv(&outcome.stdout[..], Some(expected)) {
        return Err(StageScore::failed(
            log,
            Stage::SmokeFormat,
            format!("smoke output ({} error): {e}", e.class()),
        ));
    }
    let mut log = log;
    log.push(pass(Stage::SmokeFormat, format!("{expected} rows")));
    Ok(log)
}

enum UnitFailure {
    Run(String),
    Format(String),
}

fn run_unit(
    spec: &CandidateSpec,
    program: &PathBuf,
    params: &SimParams,
    seed: u64,
) -> Result<(SimOutput, f64), UnitFailure> {
    let outcome = run_with_timeout(program, &call_args(spec, params, seed), spec.timeout_full);
    if outcome.exit != Exit::Success {
        return Err(UnitFailure::Run(failure_detail(
            &outcome,
            spec.timeout_full,
        )));
    }
    let expected = params.iterations as usize + 1;
    read_output_csv(&outcome.stdout[..], Some(expected))
        .map(|out| (out, outcome.elapsed.as_secs_f64()))
        .map_err(|e| UnitFailure::Format(format!("{} error: {e}", e.class())))
}

struct FullRuns {
    outputs: Vec<Vec<SimOutput>>,
    times: Vec<Vec<f64>>,
}

/// Runs every (parameter set, replication) unit. The reported failure is
/// the first failing unit in canonical order, whatever the worker count.
fn full_runs(
    spec: &CandidateSpec,
    config: &EvalConfig,
    trial_seed: u64,
) -> Result<(FullRuns, Vec<StageEntry>), StageScore> {
    let program = resolved(spec).unwrap_or_else(|| spec.program.clone());
    let units: Vec<(usize, usize)> = (0..config.paramsets.len())
        .flat_map(|p| (0..config.n_reps).map(move |r| (p, r)))
        .collect();
    let run = |&(p, r): &(usize, usize)| {
        let seed = EvalConfig::replication_seed(trial_seed, p, r);
        run_unit(spec, &program, &config.paramsets[p].1, seed)
    };
    let results: Vec<Result<(SimOutput, f64), UnitFailure>> = if config.jobs > 1 {
        units.par_iter().map(run).collect()
    } else {
        let mut results = Vec::with_capacity(units.len());
        for unit in &units {
            let r = run(unit);
            let failed = r.is_err();
            results.push(r);
            if failed {
                break;
            }
        }
        results
    };

    let mut outputs: Vec<Vec<SimOutput>> = vec![Vec::new(); config.paramsets.len()];
    let mut times: Vec<Vec<f64>> = vec![Vec::new(); config.paramsets.len()];
    for (&(p, r), result) in units.iter().zip(results) {
        let where_ = format!("paramset {}, rep {r}", config.paramsets[p].0);
        match result {
            Ok((out, t)) => {
                outputs[p].push(out);
                times[p].push(t);
            }
            Err(UnitFailure::Run(detail)) => {
                return Err(StageScore::failed(
                    Vec::new(),
                    Stage::FullRun,
                    format!("{where_}: {detail}"),
                ));
            }
            Err(UnitFailure::Format(detail)) => {
                let log = vec![pass(
                    Stage::FullRun,
                    format!("runs completed up to {where_}"),
                )];
                return Err(StageScore::failed(
                    log,
                    Stage::FullFormat,
                    format!("{where_}: {detail}"),
                ));
            }
        }
    }
    let total = units.len();
    let log = vec![
        pass(
            Stage::FullRun,
            format!(
                "{total} replications over {} parameter sets",
                config.paramsets.len()
            ),
        ),
        pass(Stage::FullFormat, format!("{total} outputs well-formed")),
    ];
    Ok((FullRuns { outputs, times }, log))
}

fn prefix(mut prior: Vec<StageEntry>, mut score: StageScore) -> StageScore {
    prior.append(&mut score.stage_log);
    score.stage_log = prior;
    score
}

/// A trial that either stopped before the statistics stage or is waiting
/// for the batch-wide multiple-testing correction.
enum Progress {
    Done(StageScore),
    Pending {
        log: Vec<StageEntry>,
        tests: Vec<ParamsetTest>,
        times: Vec<Vec<f64>>,
    },
}

fn advance(
    spec: &CandidateSpec,
    baseline: &Baseline,
    config: &EvalConfig,
    trial_seed: u64,
    stats_seed: u64,
) -> Progress {
    let mut log = match check_artifact(spec) {
        Ok(log) => log,
        Err(score) => return Progress::Done(score),
    };
    let smoke_params = config.paramsets[0]
        .1
        .with_iterations(config.smoke_iterations);
    match smoke_test(spec, &smoke_params, trial_seed) {
        Ok(mut entries) => log.append(&mut entries),
        Err(score) => return Progress::Done(prefix(log, score)),
    }
    let runs = match full_runs(spec, config, trial_seed) {
        Ok((runs, mut entries)) => {
            log.append(&mut entries);
            runs
        }
        Err(score) => return Progress::Done(prefix(log, score)),
    };
    let mut tests = Vec::with_capacity(config.paramsets.len());
    for (p, (candidate, reference)) in runs.outputs.iter().zip(&baseline.runs).enumerate() {
        // Candidate runs are group A, baseline runs group B.
        let test = paramset_test(
            candidate,
            reference,
            config.stats.min_variance,
            config.stats.n_permutations,
            derive_seed(stats_seed, p as u64),
        );
        match test {
            Ok(t) => tests.push(t),
            Err(e) => {
                return Progress::Done(StageScore::failed(
                    log,
                    Stage::Statistics,
                    format!("comparison failed on {}: {e}", config.paramsets[p].0),
                ))
            }
        }
    }
    Progress::Pending {
        log,
        tests,
        times: runs.times,
    }
}

#[derive(Debug, Clone)]
pub struct TrialReport {
    pub candidate: String,
    pub trial: u32,
    pub seed: u64,
    pub result: StageScore,
    /// Per parameter set, when the trial reached the statistics stage.
    pub verdicts: Vec<ParamsetVerdict>,
    /// Replication durations per parameter set, when full runs completed.
    pub times: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct BatchReport {
    pub paramset_names: Vec<String>,
    pub trials: Vec<TrialReport>,
    /// Candidate id and percentage of trials scoring 6, in manifest order.
    pub success_rates: Vec<(String, f64)>,
}

/// Applies one BH correction over every pending test and settles scores.
fn settle(
    pending: Vec<(usize, Progress)>,
    config: &EvalConfig,
) -> Vec<(usize, StageScore, Vec<ParamsetVerdict>, Vec<Vec<f64>>)> {
    let raw: Vec<f64> = pending
        .iter()
        .filter_map(|(_, p)| match p {
            Progress::Pending { tests, .. } => Some(tests.iter().map(|t| t.p_raw)),
            Progress::Done(_) => None,
        })
        .flatten()
        .collect();
    let adjusted = bh_adjust(&raw).expect("permutation p-values lie in (0, 1]");
    let mut adjusted = adjusted.into_iter();

    pending
        .into_iter()
        .map(|(idx, progress)| match progress {
            Progress::Done(score) => (idx, score, Vec::new(), Vec::new()),
            Progress::Pending {
                mut log,
                tests,
                times,
            } => {
                let verdicts: Vec<ParamsetVerdict> = tests
                    .into_iter()
                    .map(|test| {
                        let p_adjusted = adjusted.next().expect("one adjusted value per test");
                        ParamsetVerdict {
                            test,
                            p_adjusted,
                            significant: p_adjusted < config.stats.alpha,
                        }
                    })
                    .collect();
                let mut detail = String::new();
                for ((name, _), v) in config.paramsets.iter().zip(&verdicts) {
                    let _ = write!(
                        detail,
                        "{}{name}: k={} p={:.4} p_adj={:.4}",
                        if detail.is_empty() { "" } else { "; " },
                        v.test.k,
                        v.test.p_raw,
                        v.p_adjusted
                    );
                }
                let different: Vec<&str> = config
                    .paramsets
                    .iter()
                    .zip(&verdicts)
                    .filter(|(_, v)| v.significant)
                    .map(|((name, _), _)| name.as_str())
                    .collect();
                let score = if different.is_empty() {
                    log.push(pass(Stage::Statistics, detail));
                    StageScore {
                        score: Score::Indistinguishable,
                        reason: "statistically indistinguishable from baseline".into(),
                        stage_log: log,
                    }
                } else {
                    let mut s = StageScore::failed(log, Stage::Statistics, detail);
                    s.reason = format!(
                        "significant difference (adjusted p < {}) on {}",
                        config.stats.alpha,
                        different.join(", ")
                    );
                    s
                };
                (idx, score, verdicts, times)
            }
        })
        .collect()
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start workers: {e}")))
}

/// Evaluates one trial of one candidate. Its parameter-set tests form
/// their own correction family.
pub fn full_evaluation(
    spec: &CandidateSpec,
    baseline: &Baseline,
    config: &EvalConfig,
    trial_seed: u64,
) -> Result<StageScore, HarnessError> {
    config.validate()?;
    baseline.validate(config)?;
    spec.validate()?;
    let progress = pool(config.jobs)?
        .install(|| advance(spec, baseline, config, trial_seed, config.stats.seed));
    let mut settled = settle(vec![(0, progress)], config);
    Ok(settled.remove(0).1)
}

/// Evaluates every candidate over `config.trials` trials. All statistical
/// tests in the batch are corrected jointly.
pub fn evaluate_batch(
    specs: &[CandidateSpec],
    baseline: &Baseline,
    config: &EvalConfig,
) -> Result<BatchReport, HarnessError> {
    if specs.is_empty() {
        return Err(HarnessError::NoCandidates);
    }
    config.validate()?;
    baseline.validate(config)?;
    for spec in specs {
        spec.validate()?;
    }
    let units: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|s| (0..config.trials).map(move |t| (s, t)))
        .collect();
    let pending: Vec<(usize, Progress)> = pool(config.jobs)?.install(|| {
        units
            .iter()
            .enumerate()
            .map(|(i, &(s, t))| {
                let stats_seed = derive_seed(derive_seed(config.stats.seed, s as u64), t as u64);
                let progress = advance(
                    &specs[s],
                    baseline,
                    config,
                    config.trial_seed(t),
                    stats_seed,
                );
                (i, progress)
            })
            .collect()
    });
    let settled = settle(pending, config);

    let trials: Vec<TrialReport> = settled
        .into_iter()
        .map(|(i, result, verdicts, times)| {
            let (s, t) = units[i];
            TrialReport {
                candidate: specs[s].id.clone(),
                trial: t as u32,
                seed: config.trial_seed(t),
                result,
                verdicts,
                times,
            }
        })
        .collect();
    let success_rates = specs
        .iter()
        .map(|spec| {
            let scores: Vec<u8> = trials
                .iter()
                .filter(|t| t.candidate == spec.id)
                .map(|t| t.result.score.value())
                .collect();
            let rate = success_rate(&scores).expect("trials >= 1");
            (spec.id.clone(), rate)
        })
        .collect();
    Ok(BatchReport {
        paramset_names: config.paramsets.iter().map(|(n, _)| n.clone()).collect(),
        trials,
        success_rates,
    })
}

impl BatchReport {
    pub fn results_rows(&self) -> Vec<ResultRow> {
        self.trials
            .iter()
            .map(|t| ResultRow {
                candidate_id: t.candidate.clone(),
                trial_id: t.trial,
                seed: t.seed,
                score: t.result.score.value(),
                reason: t.result.reason.clone(),
            })
            .collect()
    }

    pub fn pvalue_rows(&self) -> Vec<PValueRow> {
        self.trials
            .iter()
            .flat_map(|t| {
                t.verdicts
                    .iter()
                    .zip(&self.paramset_names)
                    .map(|(v, name)| PValueRow {
                        candidate: t.candidate.clone(),
                        trial: t.trial,
                        paramset: name.clone(),
                        k: v.test.k,
                        p_raw: v.test.p_raw,
                        p_adjusted: v.p_adjusted,
                        significant: v.significant,
                    })
            })
            .collect()
    }

    /// Timing summaries of the trials that scored 6.
    pub fn timing_rows(&self, reference_means: Option<&[f64]>) -> Vec<TimingRow> {
        let mut rows = Vec::new();
        for t in &self.trials {
            if t.result.score != Score::Indistinguishable {
                continue;
            }
            for (p, (times, name)) in t.times.iter().zip(&self.paramset_names).enumerate() {
                let reference = reference_means.and_then(|r| r.get(p).copied());
                if let Ok(s) = summarize_times(times, reference) {
                    rows.push(TimingRow {
                        paramset: name.clone(),
                        trial: format!("{}#{}", t.candidate, t.trial),
                        mean_s: s.mean,
                        s_rel_pct: s.s_rel,
                        ratio: s.ratio_to_reference,
                    });
                }
            }
        }
        rows
    }

    /// Line-oriented stage log: `candidate trial stage pass|FAIL detail`.
    pub fn stage_log_text(&self) -> String {
        let mut out = String::new();
        for t in &self.trials {
            for entry in &t.result.stage_log {
                let _ = writeln!(out, "{} {} {}", t.candidate, t.trial, entry);
            }
            let _ = writeln!(out, "{} {} score {}", t.candidate, t.trial, t.result.score);
        }
        out
    }
}
