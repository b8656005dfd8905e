//! `pphpc` command-line tool.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};

use pphpc::bench::{summarize_times, time_replications};
use pphpc::harness::{self, Baseline, EvalConfig, HANDSHAKE};
use pphpc::io::{self as formats, PValueRow, TimingRow};
use pphpc::rng::derive_seed;
use pphpc::sim::{run_simulation, run_simulation_with, Ruleset, SimOutput};
use pphpc::stats::{self, CompareConfig, Group};
use pphpc::SimParams;

macro_rules! formats {
    () => {
        "\
File formats:
  parameter file  14 `key=value` lines (grid_x, grid_y, init_prey, init_predators,
                  iterations, prey_gain, predator_gain, prey_loss, predator_loss,
                  prey_repro_threshold, predator_repro_threshold, prey_repro_prob,
                  predator_repro_prob, cell_food_restart); `#` starts a comment.
  output CSV      header `total_prey,total_predators,total_food,mean_energy_prey,
                  mean_energy_predators,mean_c`, then iterations+1 rows; counts as
                  integers, means with 6 decimals, `\\n` line endings.
  run directory   one subdirectory per parameter set holding >= 2 output CSVs
                  (a directory of CSVs without subdirectories is one set).
  results.csv     candidate_id,trial_id,seed,score,reason
  p-value table   candidate,trial,paramset,k,p_raw,p_adjusted,significant
  timing table    paramset,trial,mean_s,s_rel_pct,ratio
  PC scores       `# explained_variance_ratio=r1,..,rk`, then group,pc1..pck with
                  one row per run (group A or B)."
    };
}

const FORMATS: &str = formats!();

#[derive(Parser)]
#[command(
    name = "pphpc",
    version,
    about = "PPHPC predator-prey model and replication-validation tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct SeedArg {
    /// Random seed
    #[arg(long, env = "PPHPC_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct StatsArgs {
    /// Threshold on Benjamini-Hochberg adjusted p-values
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Energy-test permutations
    #[arg(long, default_value_t = 1000)]
    permutations: usize,
    /// Cumulative explained variance used to choose the number of PCs
    #[arg(long, default_value_t = 0.80)]
    min_variance: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Run the model once and write its output CSV
    #[command(after_help = FORMATS)]
    Simulate {
        /// Parameter file
        #[arg(long)]
        params: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
        /// Output CSV (standard output when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two run directories and print the 5/6 verdict
    #[command(after_help = FORMATS)]
    Compare {
        /// Runs of the first implementation
        #[arg(long)]
        a: PathBuf,
        /// Runs of the second implementation
        #[arg(long)]
        b: PathBuf,
        #[command(flatten)]
        stats: StatsArgs,
        #[command(flatten)]
        seed: SeedArg,
        /// P-value table (candidate,trial,paramset,k,p_raw,p_adjusted,significant)
        #[arg(long)]
        report: PathBuf,
        /// Directory for PC-score exports, one `<paramset>.csv` per set
        #[arg(long)]
        pcs_dir: Option<PathBuf>,
    },
    /// Export PC scores of two run directories for plotting
    #[command(after_help = FORMATS)]
    Pcs {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 0.80)]
        min_variance: f64,
        /// Output directory, one `<paramset>.csv` per set
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score candidate simulators through the staged pipeline
    #[command(after_help = EVALUATE_HELP)]
    Evaluate(EvaluateArgs),
    /// Time replications of the built-in simulator
    #[command(after_help = FORMATS)]
    Bench {
        #[arg(long)]
        params: PathBuf,
        /// Number of replications (at least 2)
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[command(flatten)]
        seed: SeedArg,
        /// Reference mean time in seconds, for the ratio column
        #[arg(long)]
        reference_mean: Option<f64>,
        /// Label for the paramset column (defaults to the file stem)
        #[arg(long)]
        label: Option<String>,
        /// Timing CSV (standard output when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Act as a conforming candidate backed by the built-in simulator
    #[command(after_help = concat!(
        "Usage as a candidate: `pphpc candidate --check` prints the handshake;\n\
         `pphpc candidate <14 parameters> <seed>` prints an output CSV.\n\n",
        formats!()
    ))]
    Candidate {
        /// Print the handshake line and exit
        #[arg(long)]
        check: bool,
        /// Disable predation (a deliberately wrong model, for experiments)
        #[arg(long, hide = true)]
        no_predation: bool,
        /// 14 parameters in canonical order, then the seed
        values: Vec<String>,
    },
}

const EVALUATE_HELP: &str = concat!(
    "\
Manifest (TOML):
  [[candidate]]
  id = \"reference\"
  program = \"path/to/executable\"   # relative to the manifest
  args = [\"fixed\", \"args\"]          # optional
  timeout_smoke = 30                 # seconds, optional
  timeout_full = 3600                # seconds, optional

Candidate contract: `<program> <args> --check` prints `pphpc-candidate 1`;
`<program> <args> <14 parameters> <seed>` prints an output CSV with
iterations+1 rows on standard output.

Parameter sets are read from <config-dir>/set1.params and set2.params.

results.csv columns: candidate_id,trial_id,seed,score,reason
Scores: 1 missing artifact, 2 handshake failure, 3 runtime error or timeout,
4 output format violation, 5 statistically different, 6 indistinguishable.

",
    formats!()
);

#[derive(Args)]
struct EvaluateArgs {
    /// Candidate manifest
    #[arg(long)]
    manifest: PathBuf,
    /// Directory holding set1.params and set2.params
    #[arg(long)]
    config_dir: PathBuf,
    /// Recorded baseline runs (subdirectories set1/, set2/)
    #[arg(long, conflicts_with = "live")]
    baseline: Option<PathBuf>,
    /// Generate the baseline with the built-in simulator
    #[arg(long)]
    live: bool,
    /// Seed for the live baseline
    #[arg(long, default_value_t = 0xBA5E)]
    baseline_seed: u64,
    /// Trials per candidate
    #[arg(long, default_value_t = 6)]
    trials: usize,
    /// Replications per parameter set
    #[arg(long, default_value_t = 30)]
    reps: usize,
    #[command(flatten)]
    stats: StatsArgs,
    #[command(flatten)]
    seed: SeedArg,
    /// Worker threads for replications
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// results.csv output
    #[arg(long)]
    out: PathBuf,
    /// P-value table output
    #[arg(long)]
    pvalues: Option<PathBuf>,
    /// Timing table output for candidates scoring 6
    #[arg(long)]
    timings: Option<PathBuf>,
    /// Stage log output
    #[arg(long)]
    log: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))?;
    }
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn load_params(path: &Path) -> Result<SimParams> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    formats::read_param_file(f)
        .with_context(|| format!("invalid parameter file {}", path.display()))
}

impl StatsArgs {
    fn config(&self, seed: u64) -> Result<CompareConfig> {
        ensure!(
            self.alpha > 0.0 && self.alpha < 1.0,
            "--alpha must be in (0, 1)"
        );
        ensure!(self.permutations >= 1, "--permutations must be at least 1");
        ensure!(
            self.min_variance > 0.0 && self.min_variance <= 1.0,
            "--min-variance must be in (0, 1]"
        );
        Ok(CompareConfig {
            alpha: self.alpha,
            min_variance: self.min_variance,
            n_permutations: self.permutations,
            seed,
        })
    }
}

fn load_pair(a: &Path, b: &Path) -> Result<Vec<(String, Vec<SimOutput>, Vec<SimOutput>)>> {
    let sets_a = formats::read_run_dir(a)?;
    let mut sets_b = formats::read_run_dir(b)?;
    let names_a: Vec<&str> = sets_a.iter().map(|(n, _)| n.as_str()).collect();
    let names_b: Vec<&str> = sets_b.iter().map(|(n, _)| n.as_str()).collect();
    ensure!(
        names_a == names_b,
        "parameter sets differ: {names_a:?} in {} vs {names_b:?} in {}",
        a.display(),
        b.display()
    );
    Ok(sets_a
        .into_iter()
        .zip(sets_b.drain(..))
        .map(|((name, ra), (_, rb))| (name, ra, rb))
        .collect())
}

fn write_pcs(dir: &Path, name: &str, scores: &stats::PcScores) -> Result<()> {
    let labels: Vec<&str> = scores.labels.iter().map(|g| g.label()).collect();
    let path = dir.join(format!("{name}.csv"));
    let mut w = create(&path)?;
    formats::export_pc_scores(&scores.scores, &labels, &scores.explained_ratios, &mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_simulate(params: &Path, seed: u64, out: Option<&Path>) -> Result<()> {
    let params = load_params(params)?;
    let output = run_simulation(&params, seed)?;
    match out {
        Some(path) => {
            let mut w = create(path)?;
            formats::write_output_csv(&output, &mut w)?;
            w.flush()?;
        }
        None => formats::write_output_csv(&output, io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_compare(
    a: &Path,
    b: &Path,
    stats_args: &StatsArgs,
    seed: u64,
    report: &Path,
    pcs_dir: Option<&Path>,
) -> Result<()> {
    let config = stats_args.config(seed)?;
    let sets = load_pair(a, b)?;
    let runs_a: Vec<Vec<SimOutput>> = sets.iter().map(|s| s.1.clone()).collect();
    let runs_b: Vec<Vec<SimOutput>> = sets.iter().map(|s| s.2.clone()).collect();
    eprintln!("comparing {} parameter set(s)", sets.len());
    let result = stats::compare_models(&runs_a, &runs_b, &config)?;

    let rows: Vec<PValueRow> = sets
        .iter()
        .zip(&result.paramsets)
        .map(|((name, _, _), v)| PValueRow {
            candidate: a.display().to_string(),
            trial: 0,
            paramset: name.clone(),
            k: v.test.k,
            p_raw: v.test.p_raw,
            p_adjusted: v.p_adjusted,
            significant: v.significant,
        })
        .collect();
    let mut w = create(report)?;
    formats::write_pvalue_table(&rows, &mut w)?;
    w.flush()?;
    if let Some(dir) = pcs_dir {
        for ((name, _, _), v) in sets.iter().zip(&result.paramsets) {
            write_pcs(dir, name, &v.test.scores)?;
        }
    }
    for row in &rows {
        eprintln!(
            "{}: k={} p={:.4} p_adj={:.4}{}",
            row.paramset,
            row.k,
            row.p_raw,
            row.p_adjusted,
            if row.significant { " significant" } else { "" }
        );
    }
    println!("{}", result.overall_score);
    Ok(())
}

fn cmd_pcs(a: &Path, b: &Path, min_variance: f64, out_dir: &Path) -> Result<()> {
    ensure!(
        min_variance > 0.0 && min_variance <= 1.0,
        "--min-variance must be in (0, 1]"
    );
    for (name, ra, rb) in load_pair(a, b)? {
        let features = stats::build_feature_matrix(&ra, &rb)?;
        let scores = stats::pca_project(&features, min_variance)?;
        debug_assert_eq!(
            scores.labels.iter().filter(|&&g| g == Group::A).count(),
            ra.len()
        );
        write_pcs(out_dir, &name, &scores)?;
    }
    Ok(())
}

fn live_baseline(config: &EvalConfig, seed: u64) -> Result<Baseline> {
    let mut runs = Vec::new();
    let mut means = Vec::new();
    for (p, (name, params)) in config.paramsets.iter().enumerate() {
        eprintln!("generating baseline for {name} ({} runs)", config.n_reps);
        let mut group = Vec::with_capacity(config.n_reps);
        let mut total = 0.0;
        for r in 0..config.n_reps {
            let start = Instant::now();
            group.push(run_simulation(
                params,
                EvalConfig::replication_seed(seed, p, r),
            )?);
            total += start.elapsed().as_secs_f64();
        }
        means.push(total / config.n_reps as f64);
        runs.push(group);
    }
    Ok(Baseline {
        runs,
        mean_times: Some(means),
    })
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let specs = harness::read_manifest(&args.manifest)?;
    let paramsets = ["set1", "set2"]
        .iter()
        .map(|name| {
            let path = args.config_dir.join(format!("{name}.params"));
            load_params(&path).map(|p| (name.to_string(), p))
        })
        .collect::<Result<Vec<_>>>()?;
    ensure!(args.trials >= 1, "--trials must be at least 1");
    ensure!(args.reps >= 1, "--reps must be at least 1");
    ensure!(args.jobs >= 1, "--jobs must be at least 1");
    let mut config = EvalConfig::new(paramsets);
    config.trials = args.trials;
    config.n_reps = args.reps;
    config.base_seed = args.seed.seed;
    config.jobs = args.jobs;
    config.stats = args.stats.config(derive_seed(args.seed.seed, u64::MAX))?;

    let baseline = match (&args.baseline, args.live) {
        (Some(dir), false) => {
            let sets = formats::read_run_dir(dir)?;
            let mut runs = Vec::new();
            for (name, _) in &config.paramsets {
                let Some((_, group)) = sets.iter().find(|(n, _)| n == name) else {
                    bail!("baseline {} has no `{name}` subdirectory", dir.display());
                };
                runs.push(group.clone());
            }
            Baseline {
                runs,
                mean_times: None,
            }
        }
        (None, true) => live_baseline(&config, args.baseline_seed)?,
        _ => bail!("exactly one of --baseline or --live is required"),
    };

    eprintln!(
        "evaluating {} candidate(s) x {} trial(s)",
        specs.len(),
        config.trials
    );
    let report = harness::evaluate_batch(&specs, &baseline, &config)?;

    let mut w = create(&args.out)?;
    formats::write_results_table(&report.results_rows(), &mut w)?;
    w.flush()?;
    if let Some(path) = &args.pvalues {
        let mut w = create(path)?;
        formats::write_pvalue_table(&report.pvalue_rows(), &mut w)?;
        w.flush()?;
    }
    if let Some(path) = &args.timings {
        let rows = report.timing_rows(baseline.mean_times.as_deref());
        let mut w = create(path)?;
        formats::write_timing_table(&rows, &mut w)?;
        w.flush()?;
    }
    if let Some(path) = &args.log {
        let mut w = create(path)?;
        w.write_all(report.stage_log_text().as_bytes())?;
        w.flush()?;
    }
    println!("candidate_id,success_rate_pct");
    for (id, rate) in &report.success_rates {
        println!("{id},{rate:.1}");
    }
    Ok(())
}

fn cmd_bench(
    params_path: &Path,
    n: usize,
    seed: u64,
    reference_mean: Option<f64>,
    label: Option<&str>,
    out: Option<&Path>,
) -> Result<()> {
    ensure!(
        n >= 2,
        "--n must be at least 2 to estimate a standard deviation"
    );
    if let Some(r) = reference_mean {
        ensure!(r > 0.0, "--reference-mean must be positive");
    }
    let params = load_params(params_path)?;
    let label = label.map(str::to_string).unwrap_or_else(|| {
        params_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    eprintln!("timing {n} replications of {label}");
    let times = time_replications(
        |p: &SimParams, s| run_simulation(p, s).map(|_| ()),
        &params,
        n,
        seed,
    )?;
    let summary = summarize_times(&times, reference_mean)?;
    let row = TimingRow {
        paramset: label,
        trial: "0".into(),
        mean_s: summary.mean,
        s_rel_pct: summary.s_rel,
        ratio: summary.ratio_to_reference,
    };
    match out {
        Some(path) => {
            let mut w = create(path)?;
            formats::write_timing_table(&[row], &mut w)?;
            w.flush()?;
        }
        None => formats::write_timing_table(&[row], io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_candidate(check: bool, no_predation: bool, values: &[String]) -> Result<()> {
    if check {
        println!("{HANDSHAKE}");
        return Ok(());
    }
    ensure!(
        values.len() == 15,
        "expected 14 parameters and a seed, got {} values",
        values.len()
    );
    let nums = values[..14]
        .iter()
        .map(|v| {
            v.parse::<u32>()
                .with_context(|| format!("bad parameter `{v}`"))
        })
        .collect::<Result<Vec<_>>>()?;
    let seed: u64 = values[14]
        .parse()
        .with_context(|| format!("bad seed `{}`", values[14]))?;
    let params = SimParams::from_values(&nums)?;
    let rules = Ruleset {
        predation: !no_predation,
    };
    let output = run_simulation_with(&params, seed, rules)?;
    formats::write_output_csv(&output, io::stdout().lock())?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { params, seed, out } => cmd_simulate(&params, seed.seed, out.as_deref()),
        Command::Compare {
            a,
            b,
            stats,
            seed,
            report,
            pcs_dir,
        } => cmd_compare(&a, &b, &stats, seed.seed, &report, pcs_dir.as_deref()),
        Command::Pcs {
            a,
            b,
            min_variance,
            out_dir,
        } => cmd_pcs(&a, &b, min_variance, &out_dir),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Bench {
            params,
            n,
            seed,
            reference_mean,
            label,
            out,
        } => cmd_bench(
            &params,
            n,
            seed.seed,
            reference_mean,
            label.as_deref(),
            out.as_deref(),
        ),
        Command::Candidate {
            check,
            no_predation,
            values,
        } => cmd_candidate(check, no_predation, &values),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
